use std::collections::BTreeMap;

use super::ast::{CoreProgram, CoreStmt};
use super::LangError;
use crate::vass::{StateId, Vass};

/// Compiled shape of one statement, with the transition indices it produced.
/// Witness builders walk this tree to turn decisions into runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frag {
    Update(usize),
    /// Single-update loop: `enter` is the zero edge to a fresh hub, if one was needed.
    SelfLoop {
        label: Option<String>,
        enter: Option<usize>,
        body: usize,
    },
    /// Hub loop: `enter` as above, `back` returns to the hub, `exit` leaves it.
    Loop {
        label: Option<String>,
        enter: Option<usize>,
        body: Vec<Frag>,
        back: usize,
        exit: usize,
    },
    Choice {
        label: Option<String>,
        left: Branch,
        right: Branch,
    },
    /// Statements that produce no transitions (probes, empty loops).
    Nothing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub enter: usize,
    pub body: Vec<Frag>,
    pub leave: usize,
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub vass: Vass,
    pub entry: StateId,
    pub exit: StateId,
    pub frags: Vec<Frag>,
}

/// Where compilation of a block ended.
#[derive(Clone, Debug)]
pub struct Placed {
    pub exit: StateId,
    pub exit_free: bool,
    pub frags: Vec<Frag>,
}

struct Builder<'a> {
    vass: &'a mut Vass,
    prefix: &'a str,
}

impl Builder<'_> {
    fn fresh(&mut self, kind: &str) -> StateId {
        let mut n = self.vass.states().len();
        loop {
            let name = format!("{}{kind}{n}", self.prefix);
            if self.vass.state_id(&name).is_none() {
                return self.vass.add_state(name).expect("name is fresh");
            }
            n += 1;
        }
    }

    fn edge(&mut self, from: StateId, entries: &[(usize, i64)], to: StateId) -> Result<usize, LangError> {
        let mut eff = vec![0i64; self.vass.dimension()];
        for &(c, a) in entries {
            if c >= eff.len() {
                return Err(LangError::UnknownCounter(format!("#{c}")));
            }
            eff[c] = eff[c]
                .checked_add(a)
                .ok_or_else(|| LangError::Overflow(format!("update on counter {c}")))?;
        }
        Ok(self.vass.add_transition(from, eff, to).expect("states and dimension checked"))
    }

    fn zero(&mut self, from: StateId, to: StateId) -> Result<usize, LangError> {
        self.edge(from, &[], to)
    }

    /// Compiles `body` starting at `cur`. A state is free when a self-loop may
    /// be attached to it without joining an existing cycle.
    fn block(&mut self, body: &[CoreStmt], mut cur: StateId, mut free: bool) -> Result<Placed, LangError> {
        let mut frags = Vec::with_capacity(body.len());
        for s in body {
            let frag = match s {
                CoreStmt::Update(entries) => {
                    let next = self.fresh("s");
                    let t = self.edge(cur, entries, next)?;
                    cur = next;
                    free = true;
                    Frag::Update(t)
                }
                CoreStmt::Loop { label, body } => {
                    let real: Vec<&CoreStmt> =
                        body.iter().filter(|s| !matches!(s, CoreStmt::Probe(_))).collect();
                    if !produces_transitions(body) {
                        Frag::Nothing
                    } else {
                        let enter = if free {
                            None
                        } else {
                            let hub = self.fresh("h");
                            let t = self.zero(cur, hub)?;
                            cur = hub;
                            Some(t)
                        };
                        if let [CoreStmt::Update(entries)] = real.as_slice() {
                            let t = self.edge(cur, entries, cur)?;
                            free = false;
                            Frag::SelfLoop {
                                label: label.clone(),
                                enter,
                                body: t,
                            }
                        } else {
                            let hub = cur;
                            let inner = self.block(body, hub, false)?;
                            let back = self.zero(inner.exit, hub)?;
                            let out = self.fresh("x");
                            let exit = self.zero(hub, out)?;
                            cur = out;
                            free = true;
                            Frag::Loop {
                                label: label.clone(),
                                enter,
                                body: inner.frags,
                                back,
                                exit,
                            }
                        }
                    }
                }
                CoreStmt::Choice { label, left, right } => {
                    let join = self.fresh("j");
                    let branch = |b: &mut Self, stmts: &[CoreStmt]| -> Result<Branch, LangError> {
                        let start = b.fresh("c");
                        let enter = b.zero(cur, start)?;
                        let inner = b.block(stmts, start, true)?;
                        let leave = b.zero(inner.exit, join)?;
                        Ok(Branch {
                            enter,
                            body: inner.frags,
                            leave,
                        })
                    };
                    let left = branch(self, left)?;
                    let right = branch(self, right)?;
                    cur = join;
                    free = true;
                    Frag::Choice {
                        label: label.clone(),
                        left,
                        right,
                    }
                }
                CoreStmt::Probe(_) => Frag::Nothing,
                CoreStmt::ZeroTest { .. } | CoreStmt::PairFinal(_) => {
                    return Err(LangError::ResidualZeroTest)
                }
            };
            frags.push(frag);
        }
        Ok(Placed {
            exit: cur,
            exit_free: free,
            frags,
        })
    }
}

fn produces_transitions(body: &[CoreStmt]) -> bool {
    body.iter().any(|s| match s {
        CoreStmt::Update(_) | CoreStmt::Choice { .. } => true,
        CoreStmt::Loop { body, .. } => produces_transitions(body),
        _ => false,
    })
}

/// Compiles a block into an existing system, starting at `from`. New state
/// names get `prefix`. Pass `from_free = false` when `from` must not receive
/// a self-loop.
pub fn compile_into(
    vass: &mut Vass,
    body: &[CoreStmt],
    from: StateId,
    from_free: bool,
    prefix: &str,
) -> Result<Placed, LangError> {
    if body.iter().any(contains_marker) {
        return Err(LangError::ResidualZeroTest);
    }
    Builder { vass, prefix }.block(body, from, from_free)
}

fn contains_marker(s: &CoreStmt) -> bool {
    match s {
        CoreStmt::ZeroTest { .. } | CoreStmt::PairFinal(_) => true,
        CoreStmt::Loop { body, .. } => body.iter().any(contains_marker),
        CoreStmt::Choice { left, right, .. } => {
            left.iter().chain(right).any(contains_marker)
        }
        _ => false,
    }
}

/// Compiles a marker-free program; the entry and exit become the
/// distinguished states.
pub fn compile(cp: &CoreProgram) -> Result<Compiled, LangError> {
    let dim = cp.dimension();
    let mut vass = Vass::new(cp.name.clone(), dim.max(1)).map_err(|_| LangError::NoCounters)?;
    if dim == 0 {
        return Err(LangError::NoCounters);
    }
    let prefix = format!("{}.", cp.name);
    let entry = vass.add_state(format!("{prefix}in")).expect("fresh system");
    let placed = compile_into(&mut vass, &cp.body, entry, true, &prefix)?;
    vass.set_initial(entry);
    vass.set_final(placed.exit);
    Ok(Compiled {
        vass,
        entry,
        exit: placed.exit,
        frags: placed.frags,
    })
}

/// Positions of zero-test markers per counter, numbered in program order
/// over all markers (any strategy).
pub fn count_zero_tests(cp: &CoreProgram) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut pos = 0;
    cp.walk(&mut |s| {
        if let CoreStmt::ZeroTest { counter, .. } = s {
            out.entry(*counter).or_default().push(pos);
            pos += 1;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{expand, parse, Env};

    pub const TWO_PUMPS: &str = "program pumps() counters x y {
        x += 1;
        loop { x -= 1, y += 1; }
        loop { x += 2, y -= 1; }
        loop { x -= 1, y += 1; }
        loop { x += 2, y -= 1; }
    }";

    fn build(src: &str) -> Compiled {
        compile(&expand(&parse(src).unwrap(), &Env::new()).unwrap()).unwrap()
    }

    #[test]
    fn two_pumps_shape() {
        let c = build(TWO_PUMPS);
        assert_eq!(c.vass.states().len(), 5);
        assert_eq!(c.vass.transitions().len(), 8);
        let loops: Vec<Vec<i64>> = c
            .vass
            .transitions()
            .iter()
            .filter(|t| t.from == t.to)
            .map(|t| t.effect.0.clone())
            .collect();
        assert_eq!(loops, vec![vec![-1, 1], vec![2, -1], vec![-1, 1], vec![2, -1]]);
        assert!(c.vass.is_flat());
    }

    #[test]
    fn empty_program() {
        let c = build("program e() counters x { }");
        assert_eq!(c.vass.states().len(), 1);
        assert!(c.vass.transitions().is_empty());
        assert_eq!(c.entry, c.exit);
    }

    #[test]
    fn choice_shape() {
        let c = build("program c() counters x { choice { x += 1; } or { x += 2; } }");
        let Frag::Choice { left, right, .. } = &c.frags[0] else {
            panic!()
        };
        let t = c.vass.transitions();
        assert_eq!(t[left.enter].from, c.entry);
        assert_eq!(t[right.leave].to, c.exit);
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn multi_statement_loop_uses_hub() {
        let c = build("program l() counters x y { loop { x += 1; y += 1; } }");
        let Frag::Loop {
            enter, back, exit, ..
        } = &c.frags[0]
        else {
            panic!()
        };
        assert!(enter.is_none());
        let t = c.vass.transitions();
        assert_eq!(t[*back].to, c.entry);
        assert_eq!(t[*exit].from, c.entry);
        assert!(t[*exit].effect.iter().all(|&e| e == 0));
    }

    #[test]
    fn markers_must_be_eliminated() {
        let p = parse("program z() counters x { zerotest x; }").unwrap();
        let cp = expand(&p, &Env::new()).unwrap();
        assert!(matches!(compile(&cp), Err(LangError::ResidualZeroTest)));
    }

    #[test]
    fn empty_loop_emits_nothing() {
        let c = build("program e() counters x { loop { } x += 1; }");
        assert_eq!(c.vass.transitions().len(), 1);
    }

    #[test]
    fn counts_markers_in_order() {
        let p = parse("program z() counters x y { zerotest y; x += 1; zerotest x; zerotest y; }")
            .unwrap();
        let cp = expand(&p, &Env::new()).unwrap();
        let m = count_zero_tests(&cp);
        assert_eq!(m[&0], vec![1]);
        assert_eq!(m[&1], vec![0, 2]);
        let none = expand(&parse(TWO_PUMPS).unwrap(), &Env::new()).unwrap();
        assert!(count_zero_tests(&none).is_empty());
    }
}
