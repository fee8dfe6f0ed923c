use std::collections::BTreeMap;

use super::ast::{CoreProgram, CoreStmt, Expr, Program, Stmt};
use super::LangError;

pub type Env = BTreeMap<String, i64>;

pub fn eval(e: &Expr, env: &Env) -> Result<i64, LangError> {
    let bin = |a: &Expr, b: &Expr, f: fn(i64, i64) -> Option<i64>| -> Result<i64, LangError> {
        f(eval(a, env)?, eval(b, env)?).ok_or_else(|| LangError::Overflow(e.to_string()))
    };
    match e {
        Expr::Int(v) => Ok(*v),
        Expr::Var(v) => env
            .get(v)
            .copied()
            .ok_or_else(|| LangError::UnboundParameter(v.clone())),
        Expr::Add(a, b) => bin(a, b, i64::checked_add),
        Expr::Sub(a, b) => bin(a, b, i64::checked_sub),
        Expr::Mul(a, b) => bin(a, b, i64::checked_mul),
    }
}

/// Unrolls `for` loops and evaluates every expression under `env`.
pub fn expand(p: &Program, env: &Env) -> Result<CoreProgram, LangError> {
    for name in &p.params {
        match env.get(name) {
            None => return Err(LangError::UnboundParameter(name.clone())),
            Some(v) if *v < 0 => return Err(LangError::NegativeParameter(name.clone(), *v)),
            _ => {}
        }
    }
    let mut scope: Env = p
        .params
        .iter()
        .map(|n| (n.clone(), env[n]))
        .collect();
    let index = |c: &str| -> Result<usize, LangError> {
        p.counters
            .iter()
            .position(|x| x == c)
            .ok_or_else(|| LangError::UnknownCounter(c.to_string()))
    };
    let body = expand_block(&p.body, &mut scope, &index)?;
    Ok(CoreProgram {
        name: p.name.clone(),
        counters: p.counters.clone(),
        body,
    })
}

fn expand_block(
    body: &[Stmt],
    scope: &mut Env,
    index: &dyn Fn(&str) -> Result<usize, LangError>,
) -> Result<Vec<CoreStmt>, LangError> {
    let mut out = Vec::new();
    for s in body {
        match s {
            Stmt::Update(terms) => {
                let mut entries = Vec::with_capacity(terms.len());
                for t in terms {
                    let v = eval(&t.amount, scope)?;
                    let v = if t.negate {
                        v.checked_neg()
                            .ok_or_else(|| LangError::Overflow(t.amount.to_string()))?
                    } else {
                        v
                    };
                    entries.push((index(&t.counter)?, v));
                }
                out.push(CoreStmt::Update(entries));
            }
            Stmt::Loop { label, body } => out.push(CoreStmt::Loop {
                label: label.clone(),
                body: expand_block(body, scope, index)?,
            }),
            Stmt::For {
                var,
                lo,
                hi,
                descending,
                body,
            } => {
                let (lo, hi) = (eval(lo, scope)?, eval(hi, scope)?);
                let values: Box<dyn Iterator<Item = i64>> = if *descending {
                    Box::new((hi..=lo).rev())
                } else {
                    Box::new(lo..=hi)
                };
                for v in values {
                    let shadowed = scope.insert(var.clone(), v);
                    let r = expand_block(body, scope, index);
                    match shadowed {
                        Some(old) => scope.insert(var.clone(), old),
                        None => scope.remove(var),
                    };
                    out.extend(r?);
                }
            }
            Stmt::Choice { label, left, right } => out.push(CoreStmt::Choice {
                label: label.clone(),
                left: expand_block(left, scope, index)?,
                right: expand_block(right, scope, index)?,
            }),
            Stmt::ZeroTest { counter, strategy } => {
                let strategy = match strategy {
                    None => None,
                    Some(st) => {
                        let mut err = None;
                        let mapped = st.map(&mut |c| {
                            index(c).unwrap_or_else(|e| {
                                err.get_or_insert(e);
                                0
                            })
                        });
                        if let Some(e) = err {
                            return Err(e);
                        }
                        Some(mapped)
                    }
                };
                out.push(CoreStmt::ZeroTest {
                    counter: index(counter)?,
                    strategy,
                });
            }
            Stmt::PairFinal(p) => {
                let mut err = None;
                let mapped = p.map(&mut |c| {
                    index(c).unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        0
                    })
                });
                if let Some(e) = err {
                    return Err(e);
                }
                out.push(CoreStmt::PairFinal(mapped));
            }
            Stmt::Probe(c) => out.push(CoreStmt::Probe(index(c)?)),
        }
    }
    Ok(out)
}

/// Builds an environment from `(name, value)` pairs.
pub fn env(pairs: &[(&str, i64)]) -> Env {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    #[test]
    fn unrolls_for() {
        let p = parse("program t() counters x { for i := 1 to 2 { x += i; } }").unwrap();
        let cp = expand(&p, &Env::new()).unwrap();
        assert_eq!(
            cp.body,
            vec![CoreStmt::Update(vec![(0, 1)]), CoreStmt::Update(vec![(0, 2)])]
        );
    }

    #[test]
    fn empty_range() {
        let p = parse("program t() counters x { for i := 1 to 0 { x += i; } }").unwrap();
        assert!(expand(&p, &Env::new()).unwrap().body.is_empty());
    }

    #[test]
    fn downto_order() {
        let p = parse("program t() counters x { for i := 3 downto 1 { x += i; } }").unwrap();
        let cp = expand(&p, &Env::new()).unwrap();
        let vals: Vec<i64> = cp
            .body
            .iter()
            .map(|s| match s {
                CoreStmt::Update(e) => e[0].1,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(vals, vec![3, 2, 1]);
    }

    #[test]
    fn unbound_parameter() {
        let p = parse("program t(n) counters x { x += n; }").unwrap();
        assert!(matches!(
            expand(&p, &Env::new()),
            Err(LangError::UnboundParameter(n)) if n == "n"
        ));
        assert!(matches!(
            expand(&p, &env(&[("n", -1)])),
            Err(LangError::NegativeParameter(..))
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let p = parse("program t(n) counters x { x += n * n; }").unwrap();
        assert!(matches!(
            expand(&p, &env(&[("n", 1 << 40)])),
            Err(LangError::Overflow(_))
        ));
    }

    #[test]
    fn nested_for_shadows_nothing() {
        let p = parse(
            "program t(n) counters x { for i := 1 to n { for j := i to n { x += 10 * i + j; } } }",
        )
        .unwrap();
        let cp = expand(&p, &env(&[("n", 2)])).unwrap();
        assert_eq!(cp.body.len(), 3);
        assert_eq!(cp.body[2], CoreStmt::Update(vec![(0, 22)]));
    }
}
