//! Counter-program language: syntax tree, parser, `for` expansion and
//! compilation to a VASS.

mod ast;
mod compile;
mod expand;
mod parse;

pub use ast::{
    CoreProgram, CoreStmt, Expr, PairSpec, Program, Stmt, Strategy, TripleSpec, UpdateTerm,
};
pub use compile::{compile, compile_into, count_zero_tests, Branch, Compiled, Frag, Placed};
pub use expand::{env, eval, expand, Env};
pub use parse::parse;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unknown counter '{0}'")]
    UnknownCounter(String),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("duplicate name '{0}'")]
    Duplicate(String),
    #[error("zero test on '{0}' inside a loop body")]
    ZeroTestInLoop(String),
    #[error("unbound parameter '{0}'")]
    UnboundParameter(String),
    #[error("parameter '{0}' must be a natural, got {1}")]
    NegativeParameter(String, i64),
    #[error("arithmetic overflow evaluating {0}")]
    Overflow(String),
    #[error("zero-test marker left in program; eliminate markers before compiling")]
    ResidualZeroTest,
    #[error("program declares no counters")]
    NoCounters,
}
