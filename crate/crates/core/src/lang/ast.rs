use std::collections::HashSet;
use std::fmt;

use super::LangError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub(crate) fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(v) => f(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) => 2,
            _ => 3,
        }
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::Int(v)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Left operands bind at the operator's own level, right operands one
        // level tighter, so left-associative chains print without parens.
        fn side(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                let (op, p) = match self {
                    Expr::Add(..) => ("+", 1),
                    Expr::Sub(..) => ("-", 1),
                    _ => ("*", 2),
                };
                side(f, a, p)?;
                write!(f, " {op} ")?;
                side(f, b, p + 1)
            }
        }
    }
}

/// Multiplication-triple roles: `b` holds the bound complement, `c` the test
/// budget (two units per test) and `d` the flush budget.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TripleSpec<C = String> {
    pub b: C,
    pub c: C,
    pub d: C,
    pub family: Vec<C>,
}

/// Quadratic-pair roles: `b` the complement, `c` the square.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PairSpec<C = String> {
    pub b: C,
    pub c: C,
    pub family: Vec<C>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Strategy<C = String> {
    Ctrl(C),
    Triple(TripleSpec<C>),
    Pair(PairSpec<C>),
}

impl<C> Strategy<C> {
    pub fn map<D>(&self, f: &mut impl FnMut(&C) -> D) -> Strategy<D> {
        match self {
            Strategy::Ctrl(c) => Strategy::Ctrl(f(c)),
            Strategy::Triple(t) => Strategy::Triple(t.map(f)),
            Strategy::Pair(p) => Strategy::Pair(p.map(f)),
        }
    }

    /// Every counter the tag mentions.
    pub fn counters(&self) -> Vec<&C> {
        match self {
            Strategy::Ctrl(c) => vec![c],
            Strategy::Triple(t) => {
                let mut v = vec![&t.b, &t.c, &t.d];
                v.extend(&t.family);
                v
            }
            Strategy::Pair(p) => {
                let mut v = vec![&p.b, &p.c];
                v.extend(&p.family);
                v
            }
        }
    }
}

impl<C> TripleSpec<C> {
    pub fn map<D>(&self, f: &mut impl FnMut(&C) -> D) -> TripleSpec<D> {
        TripleSpec {
            b: f(&self.b),
            c: f(&self.c),
            d: f(&self.d),
            family: self.family.iter().map(f).collect(),
        }
    }
}

impl<C> PairSpec<C> {
    pub fn map<D>(&self, f: &mut impl FnMut(&C) -> D) -> PairSpec<D> {
        PairSpec {
            b: f(&self.b),
            c: f(&self.c),
            family: self.family.iter().map(f).collect(),
        }
    }
}

impl TripleSpec {
    pub fn new(b: &str, c: &str, d: &str, family: &[&str]) -> Self {
        TripleSpec {
            b: b.into(),
            c: c.into(),
            d: d.into(),
            family: family.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl PairSpec {
    pub fn new(b: &str, c: &str, family: &[&str]) -> Self {
        PairSpec {
            b: b.into(),
            c: c.into(),
            family: family.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[String]) -> fmt::Result {
    f.write_str(&items.join(","))
}

impl fmt::Display for TripleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "triple({},{},{} | ", self.b, self.c, self.d)?;
        write_list(f, &self.family)?;
        f.write_str(")")
    }
}

impl fmt::Display for PairSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pair({},{} | ", self.b, self.c)?;
        write_list(f, &self.family)?;
        f.write_str(")")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Ctrl(c) => write!(f, "ctrl({c})"),
            Strategy::Triple(t) => t.fmt(f),
            Strategy::Pair(p) => p.fmt(f),
        }
    }
}

/// One `counter += amount` (or `-=`) term of a simultaneous update.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UpdateTerm {
    pub counter: String,
    pub negate: bool,
    pub amount: Expr,
}

impl UpdateTerm {
    pub fn add(counter: &str, amount: impl Into<Expr>) -> Self {
        UpdateTerm {
            counter: counter.into(),
            negate: false,
            amount: amount.into(),
        }
    }

    pub fn sub(counter: &str, amount: impl Into<Expr>) -> Self {
        UpdateTerm {
            counter: counter.into(),
            negate: true,
            amount: amount.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    /// Simultaneous update, compiled to a single transition.
    Update(Vec<UpdateTerm>),
    Loop {
        label: Option<String>,
        body: Vec<Stmt>,
    },
    /// Compile-time unrolled; bounds inclusive.
    For {
        var: String,
        lo: Expr,
        hi: Expr,
        descending: bool,
        body: Vec<Stmt>,
    },
    Choice {
        label: Option<String>,
        left: Vec<Stmt>,
        right: Vec<Stmt>,
    },
    ZeroTest {
        counter: String,
        strategy: Option<Strategy>,
    },
    /// Where the quadratic-pair drain epilogue goes.
    PairFinal(PairSpec),
    /// Observation point with no effect; used by oracles to check marked zeros.
    Probe(String),
}

impl Stmt {
    pub fn update(terms: Vec<UpdateTerm>) -> Stmt {
        Stmt::Update(terms)
    }

    pub fn looped(body: Vec<Stmt>) -> Stmt {
        Stmt::Loop { label: None, body }
    }

    pub fn labelled_loop(label: &str, body: Vec<Stmt>) -> Stmt {
        Stmt::Loop {
            label: Some(label.into()),
            body,
        }
    }

    pub fn zero_test(counter: &str, strategy: Option<Strategy>) -> Stmt {
        Stmt::ZeroTest {
            counter: counter.into(),
            strategy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub params: Vec<String>,
    pub counters: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Program {
    /// Checks the well-formedness rules the parser enforces, so programs built
    /// in code obey the same contract.
    pub fn validate(&self) -> Result<(), LangError> {
        let mut seen = HashSet::new();
        for c in &self.counters {
            if !seen.insert(c.as_str()) {
                return Err(LangError::Duplicate(c.clone()));
            }
        }
        for p in &self.params {
            if !seen.insert(p.as_str()) {
                return Err(LangError::Duplicate(p.clone()));
            }
        }
        let counters: HashSet<&str> = self.counters.iter().map(String::as_str).collect();
        let mut scope: Vec<&str> = self.params.iter().map(String::as_str).collect();
        check_block(&self.body, &counters, &mut scope, false)
    }
}

fn check_block<'a>(
    body: &'a [Stmt],
    counters: &HashSet<&str>,
    scope: &mut Vec<&'a str>,
    in_loop: bool,
) -> Result<(), LangError> {
    let known = |c: &str| -> Result<(), LangError> {
        if counters.contains(c) {
            Ok(())
        } else {
            Err(LangError::UnknownCounter(c.to_string()))
        }
    };
    let check_expr = |e: &Expr, scope: &Vec<&str>| -> Result<(), LangError> {
        let mut bad = None;
        e.visit_vars(&mut |v| {
            if bad.is_none() && !scope.contains(&v) {
                bad = Some(v.to_string());
            }
        });
        match bad {
            Some(v) => Err(LangError::UnknownIdentifier(v)),
            None => Ok(()),
        }
    };
    for s in body {
        match s {
            Stmt::Update(terms) => {
                for t in terms {
                    known(&t.counter)?;
                    check_expr(&t.amount, scope)?;
                }
            }
            Stmt::Loop { body, .. } => check_block(body, counters, scope, true)?,
            Stmt::For {
                var, lo, hi, body, ..
            } => {
                check_expr(lo, scope)?;
                check_expr(hi, scope)?;
                if counters.contains(var.as_str()) || scope.contains(&var.as_str()) {
                    return Err(LangError::Duplicate(var.clone()));
                }
                scope.push(var);
                let r = check_block(body, counters, scope, in_loop);
                scope.pop();
                r?;
            }
            Stmt::Choice { left, right, .. } => {
                check_block(left, counters, scope, in_loop)?;
                check_block(right, counters, scope, in_loop)?;
            }
            Stmt::ZeroTest { counter, strategy } => {
                known(counter)?;
                if let Some(st) = strategy {
                    for c in st.counters() {
                        known(c)?;
                    }
                }
                if in_loop && matches!(strategy, None | Some(Strategy::Ctrl(_))) {
                    return Err(LangError::ZeroTestInLoop(counter.clone()));
                }
            }
            Stmt::PairFinal(p) => {
                for c in Strategy::Pair(p.clone()).counters() {
                    known(c)?;
                }
            }
            Stmt::Probe(c) => known(c)?,
        }
    }
    Ok(())
}

fn indent(f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
    for _ in 0..depth {
        f.write_str("  ")?;
    }
    Ok(())
}

fn write_block(f: &mut fmt::Formatter<'_>, body: &[Stmt], depth: usize) -> fmt::Result {
    f.write_str("{\n")?;
    for s in body {
        write_stmt(f, s, depth + 1)?;
    }
    indent(f, depth)?;
    f.write_str("}")
}

fn write_stmt(f: &mut fmt::Formatter<'_>, s: &Stmt, depth: usize) -> fmt::Result {
    indent(f, depth)?;
    match s {
        Stmt::Update(terms) => {
            for (i, t) in terms.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                let op = if t.negate { "-=" } else { "+=" };
                write!(f, "{} {op} {}", t.counter, t.amount)?;
            }
            f.write_str(";")?;
        }
        Stmt::Loop { label, body } => {
            f.write_str("loop ")?;
            if let Some(l) = label {
                write!(f, "@{l} ")?;
            }
            write_block(f, body, depth)?;
        }
        Stmt::For {
            var,
            lo,
            hi,
            descending,
            body,
        } => {
            let dir = if *descending { "downto" } else { "to" };
            write!(f, "for {var} := {lo} {dir} {hi} ")?;
            write_block(f, body, depth)?;
        }
        Stmt::Choice { label, left, right } => {
            f.write_str("choice ")?;
            if let Some(l) = label {
                write!(f, "@{l} ")?;
            }
            write_block(f, left, depth)?;
            f.write_str(" or ")?;
            write_block(f, right, depth)?;
        }
        Stmt::ZeroTest { counter, strategy } => {
            write!(f, "zerotest {counter}")?;
            if let Some(st) = strategy {
                write!(f, " via {st}")?;
            }
            f.write_str(";")?;
        }
        Stmt::PairFinal(p) => {
            write!(f, "pairfinal({},{} | ", p.b, p.c)?;
            write_list(f, &p.family)?;
            f.write_str(");")?;
        }
        Stmt::Probe(c) => write!(f, "probe {c};")?,
    }
    f.write_str("\n")
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "program {}({}) counters", self.name, self.params.join(", "))?;
        for c in &self.counters {
            write!(f, " {c}")?;
        }
        f.write_str(" ")?;
        write_block(f, &self.body, 0)?;
        f.write_str("\n")
    }
}

/// Ground statement: no parameters, no `for`, counters by index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CoreStmt {
    Update(Vec<(usize, i64)>),
    Loop {
        label: Option<String>,
        body: Vec<CoreStmt>,
    },
    Choice {
        label: Option<String>,
        left: Vec<CoreStmt>,
        right: Vec<CoreStmt>,
    },
    ZeroTest {
        counter: usize,
        strategy: Option<Strategy<usize>>,
    },
    PairFinal(PairSpec<usize>),
    Probe(usize),
}

impl CoreStmt {
    pub fn looped(body: Vec<CoreStmt>) -> CoreStmt {
        CoreStmt::Loop { label: None, body }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreProgram {
    pub name: String,
    pub counters: Vec<String>,
    pub body: Vec<CoreStmt>,
}

impl CoreProgram {
    pub fn dimension(&self) -> usize {
        self.counters.len()
    }

    pub fn counter_index(&self, name: &str) -> Option<usize> {
        self.counters.iter().position(|c| c == name)
    }

    /// Lifts back to surface syntax (parameterless, literal amounts).
    pub fn to_program(&self) -> Program {
        Program {
            name: self.name.clone(),
            params: Vec::new(),
            counters: self.counters.clone(),
            body: self.lift(&self.body),
        }
    }

    fn lift(&self, body: &[CoreStmt]) -> Vec<Stmt> {
        let name = |i: &usize| self.counters[*i].clone();
        body.iter()
            .map(|s| match s {
                CoreStmt::Update(entries) => Stmt::Update(
                    entries
                        .iter()
                        .map(|&(c, a)| UpdateTerm {
                            counter: self.counters[c].clone(),
                            negate: a < 0,
                            amount: Expr::Int(a.abs()),
                        })
                        .collect(),
                ),
                CoreStmt::Loop { label, body } => Stmt::Loop {
                    label: label.clone(),
                    body: self.lift(body),
                },
                CoreStmt::Choice { label, left, right } => Stmt::Choice {
                    label: label.clone(),
                    left: self.lift(left),
                    right: self.lift(right),
                },
                CoreStmt::ZeroTest { counter, strategy } => Stmt::ZeroTest {
                    counter: self.counters[*counter].clone(),
                    strategy: strategy.as_ref().map(|s| s.map(&mut |i| name(i))),
                },
                CoreStmt::PairFinal(p) => Stmt::PairFinal(p.map(&mut |i| name(i))),
                CoreStmt::Probe(c) => Stmt::Probe(self.counters[*c].clone()),
            })
            .collect()
    }

    /// Visits every statement in program order (pre-order).
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a CoreStmt)) {
        fn go<'a>(body: &'a [CoreStmt], f: &mut impl FnMut(&'a CoreStmt)) {
            for s in body {
                f(s);
                match s {
                    CoreStmt::Loop { body, .. } => go(body, f),
                    CoreStmt::Choice { left, right, .. } => {
                        go(left, f);
                        go(right, f);
                    }
                    _ => {}
                }
            }
        }
        go(&self.body, f)
    }

    pub fn has_markers(&self) -> bool {
        let mut found = false;
        self.walk(&mut |s| {
            if matches!(s, CoreStmt::ZeroTest { .. } | CoreStmt::PairFinal(_)) {
                found = true;
            }
        });
        found
    }
}

impl fmt::Display for CoreProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_program().fmt(f)
    }
}
