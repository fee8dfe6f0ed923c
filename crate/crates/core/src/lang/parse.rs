use super::ast::{Expr, PairSpec, Program, Stmt, Strategy, TripleSpec, UpdateTerm};
use super::LangError;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 14] = [
    "+=", "-=", ":=", "+", "-", "*", "(", ")", "{", "}", ",", ";", "|", "@",
];

fn lex(src: &str) -> Result<Vec<Token>, LangError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let ch = chars[i];
        if ch == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if ch.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if ch == '#' || (ch == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if ch.is_ascii_alphabetic() || ch == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - s;
            out.push(Token {
                tok: Tok::Ident(chars[s..i].iter().collect()),
                line,
                col: start_col,
            });
            continue;
        }
        if ch.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - s;
            let text: String = chars[s..i].iter().collect();
            let v = text.parse::<i64>().map_err(|_| LangError::Syntax {
                line,
                col: start_col,
                message: format!("integer literal {text} out of range"),
            })?;
            out.push(Token {
                tok: Tok::Int(v),
                line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    line,
                    col: start_col,
                });
            }
            None => {
                return Err(LangError::Syntax {
                    line,
                    col,
                    message: format!("unexpected character '{ch}'"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: [&str; 15] = [
    "program", "counters", "loop", "for", "to", "downto", "choice", "or", "zerotest", "via",
    "ctrl", "triple", "pair", "pairfinal", "probe",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn error(&self, message: impl Into<String>) -> LangError {
        let t = &self.toks[self.pos];
        LangError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(v) => format!("'{v}'"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    fn sym(&mut self, s: &str) -> Result<(), LangError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{s}', found {}", self.describe())))
        }
    }

    fn kw(&mut self, kw: &str) -> Result<(), LangError> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{kw}', found {}", self.describe())))
        }
    }

    fn ident(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.describe()))),
        }
    }

    fn ident_list(&mut self, closer: &str) -> Result<Vec<String>, LangError> {
        let mut out = Vec::new();
        if self.is_sym(closer) {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            if self.is_sym(",") {
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }

    fn program(&mut self) -> Result<Program, LangError> {
        self.kw("program")?;
        let name = self.ident()?;
        self.sym("(")?;
        let params = self.ident_list(")")?;
        self.sym(")")?;
        self.kw("counters")?;
        let mut counters = vec![self.ident()?];
        while matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str())) {
            counters.push(self.ident()?);
        }
        let body = self.block()?;
        if self.peek() != &Tok::Eof {
            return Err(self.error(format!("trailing input {}", self.describe())));
        }
        Ok(Program {
            name,
            params,
            counters,
            body,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, LangError> {
        self.sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.peek() == &Tok::Eof {
                return Err(self.error("unterminated block"));
            }
            out.push(self.stmt()?);
        }
        self.pos += 1;
        Ok(out)
    }

    fn label(&mut self) -> Result<Option<String>, LangError> {
        if self.is_sym("@") {
            self.pos += 1;
            Ok(Some(self.ident()?))
        } else {
            Ok(None)
        }
    }

    fn stmt(&mut self) -> Result<Stmt, LangError> {
        if self.is_kw("loop") {
            self.pos += 1;
            let label = self.label()?;
            let body = self.block()?;
            return Ok(Stmt::Loop { label, body });
        }
        if self.is_kw("for") {
            self.pos += 1;
            let var = self.ident()?;
            self.sym(":=")?;
            let lo = self.expr()?;
            let descending = if self.is_kw("downto") {
                true
            } else if self.is_kw("to") {
                false
            } else {
                return Err(self.error(format!(
                    "expected 'to' or 'downto', found {}",
                    self.describe()
                )));
            };
            self.pos += 1;
            let hi = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::For {
                var,
                lo,
                hi,
                descending,
                body,
            });
        }
        if self.is_kw("choice") {
            self.pos += 1;
            let label = self.label()?;
            let left = self.block()?;
            self.kw("or")?;
            let right = self.block()?;
            return Ok(Stmt::Choice { label, left, right });
        }
        if self.is_kw("zerotest") {
            self.pos += 1;
            let counter = self.ident()?;
            let strategy = if self.is_kw("via") {
                self.pos += 1;
                Some(self.strategy()?)
            } else {
                None
            };
            self.sym(";")?;
            return Ok(Stmt::ZeroTest { counter, strategy });
        }
        if self.is_kw("pairfinal") {
            self.pos += 1;
            let p = self.pair_args()?;
            self.sym(";")?;
            return Ok(Stmt::PairFinal(p));
        }
        if self.is_kw("probe") {
            self.pos += 1;
            let c = self.ident()?;
            self.sym(";")?;
            return Ok(Stmt::Probe(c));
        }
        let mut terms = Vec::new();
        loop {
            let counter = self.ident()?;
            let negate = if self.is_sym("+=") {
                false
            } else if self.is_sym("-=") {
                true
            } else {
                return Err(self.error(format!("expected '+=' or '-=', found {}", self.describe())));
            };
            self.pos += 1;
            let amount = self.expr()?;
            terms.push(UpdateTerm {
                counter,
                negate,
                amount,
            });
            if self.is_sym(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.sym(";")?;
        Ok(Stmt::Update(terms))
    }

    fn strategy(&mut self) -> Result<Strategy, LangError> {
        if self.is_kw("ctrl") {
            self.pos += 1;
            self.sym("(")?;
            let c = self.ident()?;
            self.sym(")")?;
            Ok(Strategy::Ctrl(c))
        } else if self.is_kw("triple") {
            self.pos += 1;
            self.sym("(")?;
            let b = self.ident()?;
            self.sym(",")?;
            let c = self.ident()?;
            self.sym(",")?;
            let d = self.ident()?;
            self.sym("|")?;
            let family = self.ident_list(")")?;
            self.sym(")")?;
            Ok(Strategy::Triple(TripleSpec { b, c, d, family }))
        } else if self.is_kw("pair") {
            self.pos += 1;
            Ok(Strategy::Pair(self.pair_args()?))
        } else {
            Err(self.error(format!(
                "expected ctrl, triple or pair, found {}",
                self.describe()
            )))
        }
    }

    fn pair_args(&mut self) -> Result<PairSpec, LangError> {
        self.sym("(")?;
        let b = self.ident()?;
        self.sym(",")?;
        let c = self.ident()?;
        self.sym("|")?;
        let family = self.ident_list(")")?;
        self.sym(")")?;
        Ok(PairSpec { b, c, family })
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.term()?;
        loop {
            if self.is_sym("+") {
                self.pos += 1;
                lhs = Expr::add(lhs, self.term()?);
            } else if self.is_sym("-") {
                self.pos += 1;
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.primary()?;
        while self.is_sym("*") {
            self.pos += 1;
            lhs = Expr::mul(lhs, self.primary()?);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            Tok::Sym("-") if matches!(self.toks[self.pos + 1].tok, Tok::Int(_)) => {
                self.pos += 1;
                let Tok::Int(v) = self.peek().clone() else {
                    unreachable!()
                };
                self.pos += 1;
                Ok(Expr::Int(-v))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.sym(")")?;
                Ok(e)
            }
            Tok::Ident(_) => Ok(Expr::Var(self.ident()?)),
            _ => Err(self.error(format!("expected expression, found {}", self.describe()))),
        }
    }
}

/// Parses and validates a program.
pub fn parse(src: &str) -> Result<Program, LangError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let prog = p.program()?;
    prog.validate()?;
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(body: &str) -> String {
        format!("program t() counters x y {{ {body} }}")
    }

    #[test]
    fn single_update() {
        let p = parse(&wrap("x += 1;")).unwrap();
        assert_eq!(p.body, vec![Stmt::Update(vec![UpdateTerm::add("x", 1)])]);
    }

    #[test]
    fn simultaneous_update_in_loop() {
        let p = parse(&wrap("loop { x -= 1, y += 1; }")).unwrap();
        assert_eq!(
            p.body,
            vec![Stmt::looped(vec![Stmt::Update(vec![
                UpdateTerm::sub("x", 1),
                UpdateTerm::add("y", 1)
            ])])]
        );
    }

    #[test]
    fn plain_test_inside_loop_rejected() {
        assert!(matches!(
            parse(&wrap("loop { zerotest x; }")),
            Err(LangError::ZeroTestInLoop(_))
        ));
        assert!(matches!(
            parse("program t() counters x c { loop { zerotest x via ctrl(c); } }"),
            Err(LangError::ZeroTestInLoop(_))
        ));
        assert!(parse("program t() counters x b c d { loop { zerotest x via triple(b,c,d | x); } }").is_ok());
    }

    #[test]
    fn unknown_counter() {
        assert!(matches!(
            parse(&wrap("z += 1;")),
            Err(LangError::UnknownCounter(c)) if c == "z"
        ));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse("program t() counters x {\n  x += ;\n}").unwrap_err();
        match err {
            LangError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 8)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn expression_precedence() {
        let p = parse("program t(n) counters x { x += 1 + 2 * n - 3; }").unwrap();
        let Stmt::Update(t) = &p.body[0] else { panic!() };
        assert_eq!(t[0].amount.to_string(), "1 + 2 * n - 3");
        assert_eq!(
            t[0].amount,
            Expr::sub(
                Expr::add(Expr::Int(1), Expr::mul(Expr::Int(2), Expr::var("n"))),
                Expr::Int(3)
            )
        );
    }

    #[test]
    fn strategies_and_labels() {
        let src = "program t() counters x b c d {
            choice @pick { x += 1; } or { x += 2; }
            zerotest x via triple(b,c,d | x);
            zerotest x via pair(b,c | x);
            pairfinal(b,c | x);
            loop @g { b += 1; }
        }";
        let p = parse(src).unwrap();
        assert_eq!(p.body.len(), 5);
        let again = parse(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn for_variable_scoping() {
        assert!(parse("program t(n) counters x { for i := 1 to n { x += i; } }").is_ok());
        assert!(matches!(
            parse("program t(n) counters x { for i := 1 to n { } x += i; }"),
            Err(LangError::UnknownIdentifier(_))
        ));
        assert!(matches!(
            parse("program t(n) counters x { for n := 1 to 2 { } }"),
            Err(LangError::Duplicate(_))
        ));
    }

    #[test]
    fn comments_are_skipped() {
        let p = parse("# header\nprogram t() counters x { // note\n x += 1; }").unwrap();
        assert_eq!(p.body.len(), 1);
    }
}
