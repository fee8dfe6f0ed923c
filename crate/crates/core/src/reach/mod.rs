//! Bounded exploration of VASS and counter-automaton configurations,
//! reachability witnesses, and builders for the intended runs of the
//! constructions.
//!
//! Exploration is breadth-first with a visited set keyed on the whole
//! configuration. Successors are taken in transition declaration order, so
//! every witness is the lexicographically smallest shortest run, whatever
//! the number of worker threads.

mod engine;
mod witness;

pub use witness::{
    canonical_policy, canonical_witness, drive, mutate_and_check, tower_guesses, witness_with,
    Canonical, Driven, Mutation, MutationReport, Policy, Witness, WitnessCertificate, WitnessError,
    STEP_LIMIT,
};

use std::fmt::Write as _;

use thiserror::Error;

use crate::text::write_run;
use crate::vass::{Configuration, CounterAutomaton, Run, Vass};
use engine::{bfs, Expand};

pub const DEFAULT_BUDGET: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("caps need a per-counter or a sum bound")]
    NoCap,
    #[error("node budget must be at least 1")]
    ZeroBudget,
    #[error("{found} per-counter caps for dimension {expected}")]
    CapDimension { expected: usize, found: usize },
    #[error("configuration {0} is invalid or outside the caps")]
    OutsideCaps(String),
}

/// Finite window for exploration: configurations above a cap are pruned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Caps {
    pub counters: Option<Vec<i64>>,
    pub sum: Option<i64>,
    /// Maximum number of distinct configurations to store.
    pub budget: usize,
}

impl Caps {
    pub fn per_counter(caps: impl Into<Vec<i64>>) -> Self {
        Caps {
            counters: Some(caps.into()),
            sum: None,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn uniform(dimension: usize, cap: i64) -> Self {
        Self::per_counter(vec![cap; dimension])
    }

    pub fn sum(cap: i64) -> Self {
        Caps {
            counters: None,
            sum: Some(cap),
            budget: DEFAULT_BUDGET,
        }
    }

    /// Only the node budget; for searches that are bounded some other way.
    pub fn unbounded() -> Self {
        Caps {
            counters: None,
            sum: None,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_sum(mut self, cap: i64) -> Self {
        self.sum = Some(cap);
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn admits(&self, counters: &[i64]) -> bool {
        if let Some(caps) = &self.counters {
            if counters.iter().zip(caps).any(|(v, c)| v > c) {
                return false;
            }
        }
        match self.sum {
            Some(s) => counters.iter().sum::<i64>() <= s,
            None => true,
        }
    }

    fn check(&self, dimension: usize) -> Result<(), ReachError> {
        if self.counters.is_none() && self.sum.is_none() {
            return Err(ReachError::NoCap);
        }
        self.check_shape(dimension)
    }

    fn check_shape(&self, dimension: usize) -> Result<(), ReachError> {
        if self.budget == 0 {
            return Err(ReachError::ZeroBudget);
        }
        match &self.counters {
            Some(c) if c.len() != dimension => Err(ReachError::CapDimension {
                expected: dimension,
                found: c.len(),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachReport {
    /// Distinct configurations stored.
    pub explored: usize,
    /// The capped closure was completed within the node budget.
    pub exhausted: bool,
    /// Matching configurations in discovery order.
    pub hits: Vec<Configuration>,
    /// One entry per hit when witnesses were requested.
    pub witnesses: Vec<Run>,
}

impl ReachReport {
    pub fn render(&self, vass: &Vass) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "explored={}", self.explored);
        let _ = writeln!(out, "exhausted={}", self.exhausted);
        let _ = writeln!(out, "hits={}", self.hits.len());
        for h in &self.hits {
            let _ = writeln!(out, "hit {}", vass.show(h));
        }
        for (i, w) in self.witnesses.iter().enumerate() {
            let _ = writeln!(out, "witness {} length {}", i, w.len());
            out.push_str(&write_run(vass, w));
        }
        out
    }
}

struct VassSys<'a> {
    vass: &'a Vass,
    outgoing: Vec<Vec<usize>>,
    caps: &'a Caps,
}

impl Expand for VassSys<'_> {
    fn width(&self) -> usize {
        self.vass.dimension() + 1
    }

    fn successors(&self, node: &[i64], next: &mut Vec<i64>, emit: &mut dyn FnMut(u32, &[i64])) {
        let state = node[0] as usize;
        'tr: for &t in &self.outgoing[state] {
            let tr = &self.vass.transitions()[t];
            next.clear();
            next.push(tr.to as i64);
            for (&v, &e) in node[1..].iter().zip(tr.effect.iter()) {
                match v.checked_add(e) {
                    Some(r) if r >= 0 => next.push(r),
                    _ => continue 'tr,
                }
            }
            if self.caps.admits(&next[1..]) {
                emit(t as u32, next);
            }
        }
    }
}

fn key(c: &Configuration) -> Vec<i64> {
    let mut k = Vec::with_capacity(c.counters.len() + 1);
    k.push(c.state as i64);
    k.extend_from_slice(&c.counters);
    k
}

fn unkey(k: &[i64]) -> Configuration {
    Configuration::new(k[0] as usize, k[1..].to_vec())
}

fn checked_source(vass: &Vass, src: &Configuration, caps: &Caps) -> Result<(), ReachError> {
    caps.check(vass.dimension())?;
    if vass.check_config(src).is_err() || !caps.admits(&src.counters) {
        return Err(ReachError::OutsideCaps(format!("{}{}", src.state, src.counters)));
    }
    Ok(())
}

fn search(
    vass: &Vass,
    src: &Configuration,
    caps: &Caps,
    jobs: usize,
    pred: &(dyn Fn(&Configuration) -> bool + Sync),
    witnesses: bool,
    stop_at_first: bool,
) -> Result<ReachReport, ReachError> {
    checked_source(vass, src, caps)?;
    let sys = VassSys {
        vass,
        outgoing: vass.outgoing(),
        caps,
    };
    let out = bfs(
        &sys,
        &key(src),
        caps.budget,
        jobs,
        &|k| pred(&unkey(k)),
        stop_at_first,
    );
    let hits: Vec<Configuration> = out.hits.iter().map(|&i| unkey(out.store.node(i))).collect();
    let witnesses = if witnesses {
        out.hits
            .iter()
            .map(|&i| Run {
                start: src.clone(),
                steps: out.store.path(i).into_iter().map(|t| t as usize).collect(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ReachReport {
        explored: out.store.len(),
        exhausted: out.exhausted,
        hits,
        witnesses,
    })
}

/// Capped closure of `src`; every reached configuration is a hit.
pub fn explore(vass: &Vass, src: &Configuration, caps: &Caps, jobs: usize) -> Result<ReachReport, ReachError> {
    search(vass, src, caps, jobs, &|_| true, false, false)
}

/// Capped closure of `src`, reporting the configurations satisfying `pred`
/// with a witness run for each.
pub fn explore_where(
    vass: &Vass,
    src: &Configuration,
    caps: &Caps,
    jobs: usize,
    pred: &(dyn Fn(&Configuration) -> bool + Sync),
) -> Result<ReachReport, ReachError> {
    search(vass, src, caps, jobs, pred, true, false)
}

/// Shortest run from `src` to `trg` inside the caps. The report says whether
/// the closure was exhausted when no run was found.
pub fn find_run(
    vass: &Vass,
    src: &Configuration,
    trg: &Configuration,
    caps: &Caps,
    jobs: usize,
) -> Result<(Option<Run>, ReachReport), ReachError> {
    checked_source(vass, trg, caps)?;
    let report = search(vass, src, caps, jobs, &|c| c == trg, true, true)?;
    Ok((report.witnesses.first().cloned(), report))
}

struct AutomatonSys<'a> {
    a: &'a CounterAutomaton,
    outgoing: Vec<Vec<usize>>,
    bound: i64,
    max_tests: i64,
    caps: &'a Caps,
}

impl Expand for AutomatonSys<'_> {
    fn width(&self) -> usize {
        self.a.dimension() + 2
    }

    fn successors(&self, node: &[i64], next: &mut Vec<i64>, emit: &mut dyn FnMut(u32, &[i64])) {
        let d = self.a.dimension();
        let counters = &node[1..=d];
        let tests = node[d + 1];
        'tr: for &t in &self.outgoing[node[0] as usize] {
            let tr = &self.a.system().transitions()[t];
            let mut used = tests;
            if let Some(k) = self.a.zero_test(t) {
                if counters[k] != 0 || tests >= self.max_tests {
                    continue;
                }
                used += 1;
            }
            next.clear();
            next.push(tr.to as i64);
            for (&v, &e) in counters.iter().zip(tr.effect.iter()) {
                match v.checked_add(e) {
                    Some(r) if r >= 0 => next.push(r),
                    _ => continue 'tr,
                }
            }
            if next[1..].iter().sum::<i64>() >= self.bound || !self.caps.admits(&next[1..]) {
                continue;
            }
            next.push(used);
            emit(t as u32, next);
        }
    }
}

/// Shortest accepting run of `a`: from the initial state with all counters
/// 0 to the accepting state with all counters 0, keeping the counter sum
/// strictly below `bound` and firing at most `max_tests` zero tests.
pub fn ca_accepting_run_search(
    a: &CounterAutomaton,
    bound: i64,
    max_tests: i64,
    caps: &Caps,
) -> Result<(Option<Run>, ReachReport), ReachError> {
    caps.check_shape(a.dimension())?;
    let d = a.dimension();
    let (Some(init), Some(acc)) = (a.initial(), a.accepting()) else {
        return Ok((None, empty_report()));
    };
    let start = Configuration::new(init, vec![0; d]);
    if bound <= 0 || max_tests < 0 {
        return Ok((None, empty_report()));
    }
    let sys = AutomatonSys {
        a,
        outgoing: a.system().outgoing(),
        bound,
        max_tests,
        caps,
    };
    let mut root = key(&start);
    root.push(0);
    let out = bfs(
        &sys,
        &root,
        caps.budget,
        1,
        &|k| k[0] as usize == acc && k[1..=d].iter().all(|&v| v == 0),
        true,
    );
    let run = out.hits.first().map(|&i| Run {
        start: start.clone(),
        steps: out.store.path(i).into_iter().map(|t| t as usize).collect(),
    });
    let report = ReachReport {
        explored: out.store.len(),
        exhausted: out.exhausted,
        hits: run
            .iter()
            .map(|_| Configuration::new(acc, vec![0; d]))
            .collect(),
        witnesses: run.iter().cloned().collect(),
    };
    Ok((run, report))
}

fn empty_report() -> ReachReport {
    ReachReport {
        explored: 0,
        exhausted: true,
        hits: vec![],
        witnesses: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{compile, expand, parse, Env};
    use crate::reductions::{subset_sum_to_vass, SubsetSumInstance};

    fn two_pumps() -> Vass {
        let p = parse(
            "program pumps() counters x y {
                x += 1;
                loop { x -= 1, y += 1; }
                loop { x += 2, y -= 1; }
                loop { x -= 1, y += 1; }
                loop { x += 2, y -= 1; }
            }",
        )
        .unwrap();
        compile(&expand(&p, &Env::new()).unwrap()).unwrap().vass
    }

    #[test]
    fn no_transitions_gives_source_only() {
        let mut v = Vass::new("e", 2).unwrap();
        v.add_state("q").unwrap();
        let src = Configuration::new(0, vec![1, 1]);
        let r = explore(&v, &src, &Caps::uniform(2, 3), 1).unwrap();
        assert!(r.exhausted);
        assert_eq!(r.hits, vec![src]);
    }

    #[test]
    fn two_pumps_reach_four() {
        let v = two_pumps();
        let src = Configuration::new(0, vec![0, 0]);
        let r = explore(&v, &src, &Caps::uniform(2, 8), 1).unwrap();
        assert!(r.exhausted);
        let q2 = v.final_state().unwrap();
        assert!(r.hits.contains(&Configuration::new(q2, vec![4, 0])));
    }

    #[test]
    fn find_run_trivial_and_unreachable() {
        let v = two_pumps();
        let src = Configuration::new(0, vec![0, 0]);
        let (run, _) = find_run(&v, &src, &src, &Caps::uniform(2, 4), 1).unwrap();
        assert!(run.unwrap().is_empty());

        let mut toy = Vass::new("toy", 1).unwrap();
        let a = toy.add_state("a").unwrap();
        let b = toy.add_state("b").unwrap();
        toy.add_transition(a, vec![-1], b).unwrap();
        let (run, rep) = find_run(
            &toy,
            &Configuration::new(a, vec![0]),
            &Configuration::new(b, vec![0]),
            &Caps::uniform(1, 5),
            1,
        )
        .unwrap();
        assert!(run.is_none());
        assert!(rep.exhausted);
    }

    #[test]
    fn subset_sum_witness_takes_both() {
        let c = subset_sum_to_vass(&SubsetSumInstance::new(3, &[1, 2])).unwrap();
        let z = c.source.config().unwrap();
        let trg = c.target.config().unwrap();
        let (run, _) = find_run(&c.vass, &z, &trg, &Caps::uniform(4, 40), 2).unwrap();
        let run = run.unwrap();
        let (end, _) = c.vass.validate_run(&run).unwrap();
        assert_eq!(end, trg);
        // Taking a value means entering the branch state that starts the
        // subtracting block; those are the "left" branch entries.
        let crate::lang::Frag::Choice { left: l1, .. } = &c.frags[c.frags.len() - 2] else {
            panic!()
        };
        let crate::lang::Frag::Choice { left: l2, .. } = &c.frags[c.frags.len() - 1] else {
            panic!()
        };
        assert!(run.steps.contains(&l1.enter));
        assert!(run.steps.contains(&l2.enter));
    }

    #[test]
    fn caps_are_validated() {
        let v = two_pumps();
        let src = Configuration::new(0, vec![0, 0]);
        assert_eq!(explore(&v, &src, &Caps::unbounded(), 1), Err(ReachError::NoCap));
        assert!(explore(&v, &src, &Caps::uniform(3, 1), 1).is_err());
        assert!(explore(&v, &Configuration::new(0, vec![9, 0]), &Caps::uniform(2, 1), 1).is_err());
        assert_eq!(
            explore(&v, &src, &Caps::uniform(2, 1).with_budget(0), 1),
            Err(ReachError::ZeroBudget)
        );
    }

    #[test]
    fn budget_one_is_inconclusive() {
        let v = two_pumps();
        let src = Configuration::new(0, vec![0, 0]);
        let r = explore(&v, &src, &Caps::uniform(2, 8).with_budget(1), 1).unwrap();
        assert!(!r.exhausted);
        assert_eq!(r.explored, 1);
    }

    fn inc_test_dec() -> CounterAutomaton {
        let mut a = CounterAutomaton::new("itd", 2).unwrap();
        let p = a.add_state("p").unwrap();
        let q = a.add_state("q").unwrap();
        let r = a.add_state("r").unwrap();
        a.add_update(p, vec![1, 0], q).unwrap();
        a.add_zero_test(q, vec![0, 0], 1, r).unwrap();
        a.add_update(r, vec![-1, 0], p).unwrap();
        a.set_initial(p);
        a.set_accepting(p);
        a
    }

    #[test]
    fn initial_accepting_gives_empty_run() {
        let (run, _) = ca_accepting_run_search(&inc_test_dec(), 3, 5, &Caps::unbounded()).unwrap();
        assert!(run.unwrap().is_empty());
    }

    #[test]
    fn automaton_loop_witness_length_three() {
        let mut b = CounterAutomaton::new("loop", 2).unwrap();
        let s = b.add_state("s").unwrap();
        let m = b.add_state("m").unwrap();
        let e = b.add_state("e").unwrap();
        let t = b.add_state("t").unwrap();
        b.add_update(s, vec![1, 0], m).unwrap();
        b.add_zero_test(m, vec![0, 0], 1, e).unwrap();
        b.add_update(e, vec![-1, 0], t).unwrap();
        b.set_initial(s);
        b.set_accepting(t);
        let (run, _) = ca_accepting_run_search(&b, 3, 5, &Caps::unbounded()).unwrap();
        let run = run.unwrap();
        assert_eq!(run.len(), 3);
        assert_eq!(b.validate_run(&run, 3).unwrap(), Configuration::new(t, vec![0, 0]));
        assert_eq!(b.count_tests(&run.steps), 1);
        let (none, _) = ca_accepting_run_search(&b, 3, 0, &Caps::unbounded()).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn strict_bound_blocks_sum_equal_to_bound() {
        let mut a = CounterAutomaton::new("up", 1).unwrap();
        let p = a.add_state("p").unwrap();
        let q = a.add_state("q").unwrap();
        a.add_update(p, vec![2], q).unwrap();
        a.add_update(q, vec![-2], q).unwrap();
        a.set_initial(p);
        a.set_accepting(q);
        let (none, rep) = ca_accepting_run_search(&a, 2, 0, &Caps::unbounded()).unwrap();
        assert!(none.is_none() && rep.exhausted);
        let (some, _) = ca_accepting_run_search(&a, 3, 0, &Caps::unbounded()).unwrap();
        assert_eq!(some.unwrap().len(), 2);
    }

    #[test]
    fn jobs_do_not_change_reports() {
        let c = subset_sum_to_vass(&SubsetSumInstance::new(2, &[1, 1])).unwrap();
        let z = c.source.config().unwrap();
        let caps = Caps::uniform(4, 20);
        let end = c.target.state;
        let a = explore_where(&c.vass, &z, &caps, 1, &|x| x.state == end).unwrap();
        let b = explore_where(&c.vass, &z, &caps, 4, &|x| x.state == end).unwrap();
        assert_eq!(a, b);
        assert!(!a.hits.is_empty());
    }
}
