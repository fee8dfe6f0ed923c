//! Zero-test elimination and the macros the constructions are built from.
//!
//! Markers are removed in a fixed order: complements are written into the
//! surface program, then triple and pair markers are expanded, then
//! controlling-counter markers are instrumented. Every eliminated marker
//! leaves a [`CoreStmt::Probe`] behind so interpreters can observe the
//! tested value.

use std::collections::HashSet;

use thiserror::Error;

use crate::lang::{
    CoreProgram, CoreStmt, Expr, PairSpec, Stmt, Strategy, TripleSpec, UpdateTerm,
};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GadgetError {
    #[error("counter names must be distinct: {0}")]
    DuplicateName(String),
    #[error("unknown counter '{0}'")]
    UnknownCounter(String),
    #[error("family must not be empty")]
    EmptyFamily,
    #[error("controlling-counter marker on '{0}' inside a loop")]
    MarkerInLoop(String),
    #[error("marker on '{0}' which is not controlled")]
    Uncontrolled(String),
    #[error("choice branches carry different numbers of tests on '{0}'")]
    UnbalancedChoice(String),
    #[error("marker on '{0}' outside the test family")]
    OutsideFamily(String),
    #[error("pair markers present but no pairfinal marker")]
    MissingPairFinal,
    #[error("multiplier must be at least 1")]
    BadMultiplier,
    #[error("arithmetic overflow in controlling-counter coefficient")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtrlSpec {
    pub ctrl: String,
    pub controlled: Vec<String>,
}

impl CtrlSpec {
    pub fn new(ctrl: &str, controlled: &[&str]) -> Self {
        CtrlSpec {
            ctrl: ctrl.into(),
            controlled: controlled.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn distinct<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<(), GadgetError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(GadgetError::DuplicateName(n.to_string()));
        }
    }
    Ok(())
}

fn resolve(cp: &CoreProgram, name: &str) -> Result<usize, GadgetError> {
    cp.counter_index(name)
        .ok_or_else(|| GadgetError::UnknownCounter(name.to_string()))
}

pub fn emit_flush(x: &str, y: &str, z: &str) -> Result<Stmt, GadgetError> {
    distinct([x, y, z])?;
    Ok(Stmt::looped(vec![Stmt::Update(vec![
        UpdateTerm::sub(x, 1),
        UpdateTerm::add(y, 1),
        UpdateTerm::sub(z, 1),
    ])]))
}

/// `loop{x-=1,y+=1}; zerotest x; loop{x+=c,y-=1}; zerotest y;` with the
/// markers left without a strategy.
pub fn emit_multiply(x: &str, y: &str, c: i64) -> Result<Vec<Stmt>, GadgetError> {
    distinct([x, y])?;
    if c < 1 {
        return Err(GadgetError::BadMultiplier);
    }
    Ok(vec![
        Stmt::looped(vec![Stmt::Update(vec![
            UpdateTerm::sub(x, 1),
            UpdateTerm::add(y, 1),
        ])]),
        Stmt::zero_test(x, None),
        Stmt::looped(vec![Stmt::Update(vec![
            UpdateTerm::add(x, c),
            UpdateTerm::sub(y, 1),
        ])]),
        Stmt::zero_test(y, None),
    ])
}

/// Tags every marker without a strategy.
pub fn with_strategy(stmts: Vec<Stmt>, strategy: &Strategy) -> Vec<Stmt> {
    stmts
        .into_iter()
        .map(|s| match s {
            Stmt::ZeroTest {
                counter,
                strategy: None,
            } => Stmt::ZeroTest {
                counter,
                strategy: Some(strategy.clone()),
            },
            Stmt::Loop { label, body } => Stmt::Loop {
                label,
                body: with_strategy(body, strategy),
            },
            Stmt::For {
                var,
                lo,
                hi,
                descending,
                body,
            } => Stmt::For {
                var,
                lo,
                hi,
                descending,
                body: with_strategy(body, strategy),
            },
            Stmt::Choice { label, left, right } => Stmt::Choice {
                label,
                left: with_strategy(left, strategy),
                right: with_strategy(right, strategy),
            },
            other => other,
        })
        .collect()
}

/// Keeps `b` equal to its start value minus the family total: every update
/// touching the family gets a compensating term on `b`.
pub fn with_complement(stmts: Vec<Stmt>, b: &str, family: &[&str]) -> Vec<Stmt> {
    stmts
        .into_iter()
        .map(|s| match s {
            Stmt::Update(mut terms) => {
                let mut net: Option<Expr> = None;
                for t in terms.iter().filter(|t| family.contains(&t.counter.as_str())) {
                    let amount = t.amount.clone();
                    net = Some(match (net, t.negate) {
                        (None, false) => amount,
                        (None, true) => Expr::sub(Expr::Int(0), amount),
                        (Some(acc), false) => Expr::add(acc, amount),
                        (Some(acc), true) => Expr::sub(acc, amount),
                    });
                }
                if let Some(net) = net {
                    terms.push(UpdateTerm::sub(b, net));
                }
                Stmt::Update(terms)
            }
            Stmt::Loop { label, body } => Stmt::Loop {
                label,
                body: with_complement(body, b, family),
            },
            Stmt::For {
                var,
                lo,
                hi,
                descending,
                body,
            } => Stmt::For {
                var,
                lo,
                hi,
                descending,
                body: with_complement(body, b, family),
            },
            Stmt::Choice { label, left, right } => Stmt::Choice {
                label,
                left: with_complement(left, b, family),
                right: with_complement(right, b, family),
            },
            other => other,
        })
        .collect()
}

/// Replaces `ctrl(spec.ctrl)` markers by weighted updates of the controlling
/// counter: each update `(x, a)` on a controlled `x` gains `a * Z` where `Z`
/// counts the markers on `x` still ahead on the executed path.
///
/// The controlled counters must start at zero (or the controlling counter
/// must start at the matching weighted sum); that is the caller's obligation.
pub fn instrument_ctrl(cp: &CoreProgram, spec: &CtrlSpec) -> Result<CoreProgram, GadgetError> {
    let ctrl = resolve(cp, &spec.ctrl)?;
    let mut controlled = vec![false; cp.dimension()];
    for name in &spec.controlled {
        let i = resolve(cp, name)?;
        if i == ctrl {
            return Err(GadgetError::DuplicateName(name.clone()));
        }
        controlled[i] = true;
    }
    let mut after = vec![0i64; cp.dimension()];
    let body = ctrl_block(cp, &cp.body, ctrl, &controlled, &mut after, false)?;
    Ok(CoreProgram {
        name: cp.name.clone(),
        counters: cp.counters.clone(),
        body,
    })
}

fn ctrl_block(
    cp: &CoreProgram,
    body: &[CoreStmt],
    ctrl: usize,
    controlled: &[bool],
    after: &mut Vec<i64>,
    in_loop: bool,
) -> Result<Vec<CoreStmt>, GadgetError> {
    let mut out = Vec::with_capacity(body.len());
    for s in body.iter().rev() {
        let new = match s {
            CoreStmt::ZeroTest {
                counter,
                strategy: Some(Strategy::Ctrl(c)),
            } if *c == ctrl => {
                let name = &cp.counters[*counter];
                if !controlled[*counter] {
                    return Err(GadgetError::Uncontrolled(name.clone()));
                }
                if in_loop {
                    return Err(GadgetError::MarkerInLoop(name.clone()));
                }
                after[*counter] += 1;
                CoreStmt::Probe(*counter)
            }
            CoreStmt::Update(entries) => {
                let mut extra: i64 = 0;
                for &(x, a) in entries {
                    if controlled[x] {
                        let w = a.checked_mul(after[x]).ok_or(GadgetError::Overflow)?;
                        extra = extra.checked_add(w).ok_or(GadgetError::Overflow)?;
                    }
                }
                let mut entries = entries.clone();
                if extra != 0 {
                    entries.push((ctrl, extra));
                }
                CoreStmt::Update(entries)
            }
            CoreStmt::Loop { label, body } => CoreStmt::Loop {
                label: label.clone(),
                body: ctrl_block(cp, body, ctrl, controlled, after, true)?,
            },
            CoreStmt::Choice { label, left, right } => {
                let mut after_right = after.clone();
                let left = ctrl_block(cp, left, ctrl, controlled, after, in_loop)?;
                let right = ctrl_block(cp, right, ctrl, controlled, &mut after_right, in_loop)?;
                if let Some(i) = (0..after.len()).find(|&i| after[i] != after_right[i]) {
                    return Err(GadgetError::UnbalancedChoice(cp.counters[i].clone()));
                }
                CoreStmt::Choice {
                    label: label.clone(),
                    left,
                    right,
                }
            }
            other => other.clone(),
        };
        out.push(new);
    }
    out.reverse();
    Ok(out)
}

/// Flush chain testing `chain[0]`: values move toward the front, then back.
/// Each transferred unit also decrements `budget`.
fn flush_chain(chain: &[usize], budget: usize) -> Vec<CoreStmt> {
    let flush = |from: usize, to: usize| {
        CoreStmt::looped(vec![CoreStmt::Update(vec![
            (from, -1),
            (to, 1),
            (budget, -1),
        ])])
    };
    let mut out = Vec::with_capacity(2 * chain.len());
    for w in chain.windows(2) {
        out.push(flush(w[1], w[0]));
    }
    for w in chain.windows(2).rev() {
        out.push(flush(w[0], w[1]));
    }
    out
}

/// Chain order for a test on `x`: the family rotated so `x` comes first,
/// then `b`. A test on `b` itself uses `b` followed by the family.
pub fn test_chain(x: usize, b: usize, family: &[usize]) -> Option<Vec<usize>> {
    if x == b {
        let mut chain = vec![b];
        chain.extend_from_slice(family);
        return Some(chain);
    }
    let k = family.iter().position(|&f| f == x)?;
    let mut chain: Vec<usize> = family[k..].iter().chain(&family[..k]).copied().collect();
    chain.push(b);
    Some(chain)
}

/// Statements simulating one triple test of `x`.
pub fn triple_test_body(x: usize, spec: &TripleSpec<usize>) -> Option<Vec<CoreStmt>> {
    let mut out = flush_chain(&test_chain(x, spec.b, &spec.family)?, spec.d);
    out.push(CoreStmt::Update(vec![(spec.c, -2)]));
    Some(out)
}

/// Statements simulating one pair test of `x`.
pub fn pair_test_body(x: usize, spec: &PairSpec<usize>) -> Option<Vec<CoreStmt>> {
    let mut out = flush_chain(&test_chain(x, spec.b, &spec.family)?, spec.c);
    out.push(CoreStmt::Update(vec![(spec.b, -1), (spec.c, 1)]));
    Some(out)
}

/// Test body used while draining: the `c += 1` of the test runs before the
/// flushes, so the last test from (b, c) = (1, 1) does not dip below zero.
fn artificial_test_body(spec: &PairSpec<usize>) -> Vec<CoreStmt> {
    let chain = test_chain(spec.family[0], spec.b, &spec.family).expect("family member");
    let mut out = vec![CoreStmt::Update(vec![(spec.c, 1)])];
    out.extend(flush_chain(&chain, spec.c));
    out.push(CoreStmt::Update(vec![(spec.b, -1)]));
    out
}

fn resolve_triple(cp: &CoreProgram, spec: &TripleSpec) -> Result<TripleSpec<usize>, GadgetError> {
    if spec.family.is_empty() {
        return Err(GadgetError::EmptyFamily);
    }
    distinct(
        [&spec.b, &spec.c, &spec.d]
            .into_iter()
            .chain(&spec.family)
            .map(String::as_str),
    )?;
    let mut err = None;
    let r = spec.map(&mut |n| {
        resolve(cp, n).unwrap_or_else(|e| {
            err.get_or_insert(e);
            0
        })
    });
    err.map_or(Ok(r), Err)
}

fn resolve_pair(cp: &CoreProgram, spec: &PairSpec) -> Result<PairSpec<usize>, GadgetError> {
    if spec.family.is_empty() {
        return Err(GadgetError::EmptyFamily);
    }
    distinct(
        [&spec.b, &spec.c]
            .into_iter()
            .chain(&spec.family)
            .map(String::as_str),
    )?;
    let mut err = None;
    let r = spec.map(&mut |n| {
        resolve(cp, n).unwrap_or_else(|e| {
            err.get_or_insert(e);
            0
        })
    });
    err.map_or(Ok(r), Err)
}

/// Replacement for a statement, or `None` to keep it (recursing into bodies).
type Rewrite<'a> = dyn FnMut(&CoreStmt) -> Result<Option<Vec<CoreStmt>>, GadgetError> + 'a;

fn map_markers(
    body: &[CoreStmt],
    f: &mut Rewrite<'_>,
) -> Result<Vec<CoreStmt>, GadgetError> {
    let mut out = Vec::with_capacity(body.len());
    for s in body {
        if let Some(rep) = f(s)? {
            out.extend(rep);
            continue;
        }
        out.push(match s {
            CoreStmt::Loop { label, body } => CoreStmt::Loop {
                label: label.clone(),
                body: map_markers(body, f)?,
            },
            CoreStmt::Choice { label, left, right } => CoreStmt::Choice {
                label: label.clone(),
                left: map_markers(left, f)?,
                right: map_markers(right, f)?,
            },
            other => other.clone(),
        });
    }
    Ok(out)
}

/// Expands every marker tagged with `spec` into the flush-chain test.
pub fn expand_triple_tests(cp: &CoreProgram, spec: &TripleSpec) -> Result<CoreProgram, GadgetError> {
    let rs = resolve_triple(cp, spec)?;
    let body = map_markers(&cp.body, &mut |s| match s {
        CoreStmt::ZeroTest {
            counter,
            strategy: Some(Strategy::Triple(t)),
        } if *t == rs => {
            let mut rep = vec![CoreStmt::Probe(*counter)];
            rep.extend(
                triple_test_body(*counter, &rs)
                    .ok_or_else(|| GadgetError::OutsideFamily(cp.counters[*counter].clone()))?,
            );
            Ok(Some(rep))
        }
        _ => Ok(None),
    })?;
    Ok(CoreProgram {
        name: cp.name.clone(),
        counters: cp.counters.clone(),
        body,
    })
}

pub const PAIR_DRAIN: &str = "pairfinal";
pub const PAIR_STEP: &str = "pairfinal.step";

pub fn pair_dec_label(k: usize) -> String {
    format!("pairfinal.dec.{k}")
}

/// Drain epilogue: any interleaving of family decrements and artificial
/// tests.
pub fn pair_epilogue(spec: &PairSpec<usize>) -> Vec<CoreStmt> {
    let decs: Vec<CoreStmt> = spec
        .family
        .iter()
        .map(|&x| CoreStmt::Update(vec![(x, -1)]))
        .collect();
    let mut dec = vec![decs[decs.len() - 1].clone()];
    for k in (0..decs.len() - 1).rev() {
        dec = vec![CoreStmt::Choice {
            label: Some(pair_dec_label(k)),
            left: vec![decs[k].clone()],
            right: dec,
        }];
    }
    let test = artificial_test_body(spec);
    vec![CoreStmt::Loop {
        label: Some(PAIR_DRAIN.into()),
        body: vec![CoreStmt::Choice {
            label: Some(PAIR_STEP.into()),
            left: test,
            right: dec,
        }],
    }]
}

/// Expands pair markers and the drain epilogue at the `pairfinal` marker.
pub fn expand_pair_tests(cp: &CoreProgram, spec: &PairSpec) -> Result<CoreProgram, GadgetError> {
    let rs = resolve_pair(cp, spec)?;
    let (mut tests, mut finals) = (0, 0);
    let body = map_markers(&cp.body, &mut |s| match s {
        CoreStmt::ZeroTest {
            counter,
            strategy: Some(Strategy::Pair(p)),
        } if *p == rs => {
            tests += 1;
            let mut rep = vec![CoreStmt::Probe(*counter)];
            rep.extend(
                pair_test_body(*counter, &rs)
                    .ok_or_else(|| GadgetError::OutsideFamily(cp.counters[*counter].clone()))?,
            );
            Ok(Some(rep))
        }
        CoreStmt::PairFinal(p) if *p == rs => {
            finals += 1;
            Ok(Some(pair_epilogue(&rs)))
        }
        _ => Ok(None),
    })?;
    if tests > 0 && finals == 0 {
        return Err(GadgetError::MissingPairFinal);
    }
    Ok(CoreProgram {
        name: cp.name.clone(),
        counters: cp.counters.clone(),
        body,
    })
}

pub const AMP_GUESS: &str = "amp.guess";
pub const AMP_MAIN: &str = "amp.main";

/// Amplifier over counters `x[0..7]` (x1..x7): the triple sits on
/// (x1, x2, x3) with x2 in the bound role and x1 as the test budget.
/// Produces (2^B, C', 2^B C') on (x5, x6, x7) from (B, C, BC).
pub fn amplifier_stmts(x: [&str; 7]) -> Result<Vec<Stmt>, GadgetError> {
    distinct(x)?;
    let family = [x[3], x[4], x[5], x[6]];
    let strategy = Strategy::Triple(TripleSpec::new(x[1], x[0], x[2], &family));
    let mut main = emit_multiply(x[4], x[3], 256)?;
    main.extend(emit_multiply(x[6], x[3], 256)?);
    let body = vec![
        Stmt::Update(vec![UpdateTerm::add(x[4], 1)]),
        Stmt::labelled_loop(
            AMP_GUESS,
            vec![Stmt::Update(vec![
                UpdateTerm::add(x[5], 1),
                UpdateTerm::add(x[6], 1),
            ])],
        ),
        Stmt::labelled_loop(AMP_MAIN, with_strategy(main, &strategy)),
    ];
    let mut body = with_complement(body, x[1], &family);
    body.push(Stmt::looped(vec![Stmt::Update(vec![UpdateTerm::sub(x[1], 1)])]));
    Ok(body)
}

/// The amplifier as a ground program over counters x1..x7, markers expanded.
pub fn build_amplifier() -> Result<CoreProgram, GadgetError> {
    let names = ["x1", "x2", "x3", "x4", "x5", "x6", "x7"];
    let p = crate::lang::Program {
        name: "amplifier".into(),
        params: vec![],
        counters: names.iter().map(|s| s.to_string()).collect(),
        body: amplifier_stmts(names)?,
    };
    let cp = crate::lang::expand(&p, &Default::default()).expect("amplifier is well formed");
    expand_triple_tests(&cp, &amplifier_triple(names))
}

pub fn amplifier_triple(x: [&str; 7]) -> TripleSpec {
    TripleSpec::new(x[1], x[0], x[2], &[x[3], x[4], x[5], x[6]])
}

fn collect_strategies(body: &[CoreStmt], out: &mut Vec<Strategy<usize>>, tested: &mut Vec<(usize, usize)>) {
    for s in body {
        match s {
            CoreStmt::ZeroTest {
                counter,
                strategy: Some(st),
            } => {
                if !out.contains(st) {
                    out.push(st.clone());
                }
                if let Strategy::Ctrl(c) = st {
                    if !tested.contains(&(*c, *counter)) {
                        tested.push((*c, *counter));
                    }
                }
            }
            CoreStmt::PairFinal(p) => {
                let st = Strategy::Pair(p.clone());
                if !out.contains(&st) {
                    out.push(st);
                }
            }
            CoreStmt::Loop { body, .. } => collect_strategies(body, out, tested),
            CoreStmt::Choice { left, right, .. } => {
                collect_strategies(left, out, tested);
                collect_strategies(right, out, tested);
            }
            _ => {}
        }
    }
}

/// Eliminates every tagged marker: triple and pair markers first, then each
/// controlling counter over the counters its markers test. Untagged markers
/// are left in place.
pub fn eliminate_markers(cp: &CoreProgram) -> Result<CoreProgram, GadgetError> {
    let mut strategies = Vec::new();
    let mut tested = Vec::new();
    collect_strategies(&cp.body, &mut strategies, &mut tested);
    let name = |i: &usize| cp.counters[*i].clone();
    let mut out = cp.clone();
    for st in &strategies {
        match st {
            Strategy::Triple(t) => out = expand_triple_tests(&out, &t.map(&mut |i| name(i)))?,
            Strategy::Pair(p) => out = expand_pair_tests(&out, &p.map(&mut |i| name(i)))?,
            Strategy::Ctrl(_) => {}
        }
    }
    for st in &strategies {
        if let Strategy::Ctrl(c) = st {
            let controlled: Vec<&str> = tested
                .iter()
                .filter(|(k, _)| k == c)
                .map(|(_, x)| cp.counters[*x].as_str())
                .collect();
            out = instrument_ctrl(&out, &CtrlSpec::new(&cp.counters[*c], &controlled))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{compile, env, expand, parse, Program};

    fn core(src: &str) -> CoreProgram {
        expand(&parse(src).unwrap(), &env(&[])).unwrap()
    }

    #[test]
    fn flush_shape() {
        let s = emit_flush("a", "b", "d").unwrap();
        assert_eq!(s.to_string_in("t", &["a", "b", "d"]), "loop {\n  a -= 1, b += 1, d -= 1;\n}");
        assert!(emit_flush("a", "a", "d").is_err());
    }

    #[test]
    fn multiply_has_two_markers() {
        let m = emit_multiply("x", "y", 2).unwrap();
        let markers = m
            .iter()
            .filter(|s| matches!(s, Stmt::ZeroTest { .. }))
            .count();
        assert_eq!(markers, 2);
        assert!(emit_multiply("x", "y", 0).is_err());
    }

    #[test]
    fn complement_terms() {
        let s = with_complement(
            vec![Stmt::Update(vec![
                UpdateTerm::add("x", 4),
                UpdateTerm::sub("y", 1),
                UpdateTerm::add("z", 7),
            ])],
            "b",
            &["x", "y"],
        );
        let p = Program {
            name: "t".into(),
            params: vec![],
            counters: vec!["x".into(), "y".into(), "z".into(), "b".into()],
            body: s,
        };
        let cp = expand(&p, &env(&[])).unwrap();
        assert_eq!(cp.body[0], CoreStmt::Update(vec![(0, 4), (1, -1), (2, 7), (3, -3)]));
    }

    #[test]
    fn ctrl_weights_count_later_markers() {
        let cp = core(
            "program t() counters x c {
                x += 2;
                loop { x -= 1; }
                zerotest x via ctrl(c);
                x += 1;
                x -= 1;
                zerotest x via ctrl(c);
            }",
        );
        let out = instrument_ctrl(&cp, &CtrlSpec::new("c", &["x"])).unwrap();
        assert_eq!(out.body[0], CoreStmt::Update(vec![(0, 2), (1, 4)]));
        assert_eq!(
            out.body[1],
            CoreStmt::looped(vec![CoreStmt::Update(vec![(0, -1), (1, -2)])])
        );
        assert_eq!(out.body[2], CoreStmt::Probe(0));
        assert_eq!(out.body[3], CoreStmt::Update(vec![(0, 1), (1, 1)]));
        assert_eq!(out.body[4], CoreStmt::Update(vec![(0, -1), (1, -1)]));
        assert!(!out.has_markers());
    }

    #[test]
    fn ctrl_errors() {
        let cp = core("program t() counters x y c { zerotest y via ctrl(c); }");
        assert_eq!(
            instrument_ctrl(&cp, &CtrlSpec::new("c", &["x"])),
            Err(GadgetError::Uncontrolled("y".into()))
        );
        let cp = core(
            "program t() counters x c { choice { zerotest x via ctrl(c); } or { x += 1; } }",
        );
        assert_eq!(
            instrument_ctrl(&cp, &CtrlSpec::new("c", &["x"])),
            Err(GadgetError::UnbalancedChoice("x".into()))
        );
    }

    #[test]
    fn classic_triple_test() {
        let cp = core("program t() counters x b c d { zerotest x via triple(b,c,d | x); }");
        let out = expand_triple_tests(&cp, &TripleSpec::new("b", "c", "d", &["x"])).unwrap();
        assert_eq!(
            out.body,
            vec![
                CoreStmt::Probe(0),
                CoreStmt::looped(vec![CoreStmt::Update(vec![(1, -1), (0, 1), (3, -1)])]),
                CoreStmt::looped(vec![CoreStmt::Update(vec![(0, -1), (1, 1), (3, -1)])]),
                CoreStmt::Update(vec![(2, -2)]),
            ]
        );
    }

    #[test]
    fn triple_family_of_three() {
        let cp = core(
            "program t() counters x1 x2 x3 b c d { zerotest x2 via triple(b,c,d | x1,x2,x3); }",
        );
        let out =
            expand_triple_tests(&cp, &TripleSpec::new("b", "c", "d", &["x1", "x2", "x3"])).unwrap();
        let loops = out
            .body
            .iter()
            .filter(|s| matches!(s, CoreStmt::Loop { .. }))
            .count();
        assert_eq!(loops, 6);
        assert_eq!(out.body.last(), Some(&CoreStmt::Update(vec![(4, -2)])));
        // Chain is x2, x3, x1, b: the first flush moves x3 into x2.
        assert_eq!(
            out.body[1],
            CoreStmt::looped(vec![CoreStmt::Update(vec![(2, -1), (1, 1), (5, -1)])])
        );
    }

    #[test]
    fn triple_marker_outside_family() {
        let cp = core("program t() counters x y b c d { zerotest y via triple(b,c,d | x); }");
        assert_eq!(
            expand_triple_tests(&cp, &TripleSpec::new("b", "c", "d", &["x"])),
            Err(GadgetError::OutsideFamily("y".into()))
        );
    }

    #[test]
    fn pair_test_and_epilogue() {
        let cp = core(
            "program t() counters x b c { zerotest x via pair(b,c | x); pairfinal(b,c | x); }",
        );
        let spec = PairSpec::new("b", "c", &["x"]);
        let out = expand_pair_tests(&cp, &spec).unwrap();
        assert_eq!(out.body[3], CoreStmt::Update(vec![(1, -1), (2, 1)]));
        assert!(matches!(&out.body[4], CoreStmt::Loop { label: Some(l), .. } if l == PAIR_DRAIN));
        compile(&out).unwrap();

        let missing = core("program t() counters x b c { zerotest x via pair(b,c | x); }");
        assert_eq!(
            expand_pair_tests(&missing, &spec),
            Err(GadgetError::MissingPairFinal)
        );
    }

    #[test]
    fn amplifier_builds_and_compiles() {
        let amp = build_amplifier().unwrap();
        assert!(!amp.has_markers());
        let c = compile(&amp).unwrap();
        assert_eq!(c.vass.dimension(), 7);
    }

    trait ShowStmt {
        fn to_string_in(&self, name: &str, counters: &[&str]) -> String;
    }

    impl ShowStmt for Stmt {
        fn to_string_in(&self, name: &str, counters: &[&str]) -> String {
            let p = Program {
                name: name.into(),
                params: vec![],
                counters: counters.iter().map(|s| s.to_string()).collect(),
                body: vec![self.clone()],
            };
            let text = p.to_string();
            let start = text.find('{').unwrap() + 2;
            let end = text.rfind('}').unwrap() - 1;
            text[start..end]
                .lines()
                .map(|l| l.strip_prefix("  ").unwrap_or(l))
                .collect::<Vec<_>>()
                .join("\n")
        }
    }

    #[test]
    fn eliminate_all_strategies() {
        let cp = core(
            "program m() counters x y c b t d {
                x += 1; x -= 1;
                zerotest x via ctrl(c);
                zerotest y via triple(b,t,d | y);
            }",
        );
        let out = eliminate_markers(&cp).unwrap();
        assert!(compile(&out).is_ok());
        assert!(matches!(out.body[0], CoreStmt::Update(ref e) if e.contains(&(2, 1))));
        let untouched = core("program u() counters x { zerotest x; }");
        assert_eq!(eliminate_markers(&untouched).unwrap(), untouched);
    }
}
