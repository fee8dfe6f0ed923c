//! Reference semantics written independently of the compiler and the
//! exploration engine.

use std::collections::{BTreeSet, HashSet};

use crate::lang::CoreStmt;
use crate::reductions::SubsetSumInstance;
use crate::vass::CounterAutomaton;

/// Tries every subset.
pub fn subset_sum_brute(inst: &SubsetSumInstance) -> bool {
    let n = inst.values.len();
    assert!(n < 64, "brute force over {n} values");
    (0u64..1 << n).any(|m| {
        (0..n)
            .filter(|i| m >> i & 1 == 1)
            .map(|i| inst.values[i] as u128)
            .sum::<u128>()
            == inst.target as u128
    })
}

/// Counter vector plus "every probe so far saw zero".
pub type Marked = (Vec<i64>, bool);

/// Direct interpreter for ground programs: all vectors reachable at the end
/// of `body` from `start`, with counters kept in `0..=caps[i]` at every
/// step. Probes clear the flag when their counter is nonzero. Loops run to
/// a fixpoint.
pub fn interpret(body: &[CoreStmt], start: Vec<i64>, caps: &[i64]) -> BTreeSet<Marked> {
    let mut set = BTreeSet::new();
    if start.iter().zip(caps).all(|(v, c)| (0..=*c).contains(v)) {
        set.insert((start, true));
    }
    block(body, set, caps)
}

fn block(body: &[CoreStmt], mut set: BTreeSet<Marked>, caps: &[i64]) -> BTreeSet<Marked> {
    for s in body {
        set = stmt(s, set, caps);
    }
    set
}

fn stmt(s: &CoreStmt, set: BTreeSet<Marked>, caps: &[i64]) -> BTreeSet<Marked> {
    match s {
        CoreStmt::Update(entries) => set
            .into_iter()
            .filter_map(|(mut v, ok)| {
                for &(i, a) in entries {
                    v[i] += a;
                }
                v.iter()
                    .zip(caps)
                    .all(|(x, c)| (0..=*c).contains(x))
                    .then_some((v, ok))
            })
            .collect(),
        CoreStmt::Loop { body, .. } => {
            let mut all = set.clone();
            let mut frontier = set;
            while !frontier.is_empty() {
                let next = block(body, frontier, caps);
                frontier = next.into_iter().filter(|m| !all.contains(m)).collect();
                all.extend(frontier.iter().cloned());
            }
            all
        }
        CoreStmt::Choice { left, right, .. } => {
            let mut l = block(left, set.clone(), caps);
            l.extend(block(right, set, caps));
            l
        }
        CoreStmt::Probe(x) | CoreStmt::ZeroTest { counter: x, .. } => set
            .into_iter()
            .map(|(v, ok)| {
                let ok = ok && v[*x] == 0;
                (v, ok)
            })
            .collect(),
        CoreStmt::PairFinal(_) => panic!("interpreter does not model pair epilogues"),
    }
}

/// Accepting-run existence by depth-first search over
/// (state, counters, tests used), with zero-test guards and the strict
/// bound `sum < bound`.
pub fn dfs_accepting(a: &CounterAutomaton, bound: i64, max_tests: i64) -> bool {
    let (Some(init), Some(acc)) = (a.initial(), a.accepting()) else {
        return false;
    };
    let d = a.dimension();
    let trans: Vec<_> = a.transitions().map(|(t, z)| (t.clone(), z)).collect();
    let mut seen = HashSet::new();
    fn go(
        node: (usize, Vec<i64>, i64),
        acc: usize,
        trans: &[(crate::vass::Transition, Option<usize>)],
        bound: i64,
        max_tests: i64,
        seen: &mut HashSet<(usize, Vec<i64>, i64)>,
    ) -> bool {
        if node.0 == acc && node.1.iter().all(|&v| v == 0) {
            return true;
        }
        if !seen.insert(node.clone()) {
            return false;
        }
        let (q, v, used) = &node;
        for (t, z) in trans.iter().filter(|(t, _)| t.from == *q) {
            let mut used = *used;
            if let Some(k) = z {
                if v[*k] != 0 || used == max_tests {
                    continue;
                }
                used += 1;
            }
            let w: Vec<i64> = v.iter().zip(t.effect.iter()).map(|(a, b)| a + b).collect();
            if w.iter().any(|&x| x < 0) || w.iter().sum::<i64>() >= bound {
                continue;
            }
            if go((t.to, w, used), acc, trans, bound, max_tests, seen) {
                return true;
            }
        }
        false
    }
    if bound <= 0 {
        return false;
    }
    go((init, vec![0; d], 0), acc, &trans, bound, max_tests, &mut seen)
}

/// Every automaton with one counter, one or two states (initial state 0,
/// any accepting state), and at most three distinct transitions, each
/// adding -1, 0 or 1 and optionally guarded by a zero test.
pub fn automaton_grid() -> Vec<CounterAutomaton> {
    let mut out = Vec::new();
    for states in 1..=2usize {
        let mut letters = Vec::new();
        for from in 0..states {
            for to in 0..states {
                for eff in [-1i64, 0, 1] {
                    for guard in [false, true] {
                        letters.push((from, to, eff, guard));
                    }
                }
            }
        }
        let n = letters.len();
        let mut subsets: Vec<Vec<usize>> = vec![vec![]];
        for a in 0..n {
            subsets.push(vec![a]);
            for b in a + 1..n {
                subsets.push(vec![a, b]);
                for c in b + 1..n {
                    subsets.push(vec![a, b, c]);
                }
            }
        }
        for acc in 0..states {
            for subset in &subsets {
                let name = format!(
                    "g{states}a{acc}t{}",
                    subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
                );
                let mut a = CounterAutomaton::new(name, 1).expect("dimension 1");
                for s in 0..states {
                    a.add_state(format!("q{s}")).expect("fresh");
                }
                for &i in subset {
                    let (from, to, eff, guard) = letters[i];
                    if guard {
                        a.add_zero_test(from, vec![eff], 0, to).expect("valid");
                    } else {
                        a.add_update(from, vec![eff], to).expect("valid");
                    }
                }
                a.set_initial(0);
                a.set_accepting(acc);
                out.push(a);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{expand, parse, Env};

    #[test]
    fn brute_force_subset_sum() {
        assert!(subset_sum_brute(&SubsetSumInstance::new(3, &[1, 2])));
        assert!(!subset_sum_brute(&SubsetSumInstance::new(4, &[1, 2])));
        assert!(subset_sum_brute(&SubsetSumInstance::new(0, &[])));
    }

    #[test]
    fn interpreter_two_pumps() {
        let p = parse(
            "program pumps() counters x y {
                x += 1;
                loop { x -= 1, y += 1; }
                loop { x += 2, y -= 1; }
            }",
        )
        .unwrap();
        let cp = expand(&p, &Env::new()).unwrap();
        let out = interpret(&cp.body, vec![0, 0], &[8, 8]);
        let vs: BTreeSet<Vec<i64>> = out.into_iter().map(|(v, _)| v).collect();
        assert!(vs.contains(&vec![2, 0]));
        assert!(vs.contains(&vec![1, 0]));
        assert!(!vs.contains(&vec![3, 0]));
    }

    #[test]
    fn probes_track_zero() {
        let p = parse("program p() counters x { choice { x += 1; } or { } zerotest x; }").unwrap();
        let cp = expand(&p, &Env::new()).unwrap();
        let out = interpret(&cp.body, vec![0], &[3]);
        assert_eq!(out, BTreeSet::from([(vec![0], true), (vec![1], false)]));
    }

    #[test]
    fn grid_size() {
        let g = automaton_grid();
        assert_eq!(g.len(), 42 + 2 * (1 + 24 + 276 + 2024));
    }

    #[test]
    fn dfs_respects_strict_bound() {
        let mut a = CounterAutomaton::new("up", 1).unwrap();
        let p = a.add_state("p").unwrap();
        let q = a.add_state("q").unwrap();
        a.add_update(p, vec![1], p).unwrap();
        a.add_zero_test(p, vec![0], 0, q).unwrap();
        a.add_update(p, vec![-1], q).unwrap();
        a.set_initial(p);
        a.set_accepting(q);
        assert!(dfs_accepting(&a, 2, 0));
        assert!(!dfs_accepting(&a, 1, 0));
        assert!(dfs_accepting(&a, 1, 1));
    }
}
