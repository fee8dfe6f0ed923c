use std::collections::BTreeSet;

use proptest::prelude::*;

use vasslab::lang::{compile, expand, parse, CoreProgram, CoreStmt, Env};
use vasslab::reach::{explore, explore_where, Caps};
use vasslab::vass::{Configuration, Run, Vass};
use vasslab::verify::oracle::interpret;

fn update(dim: usize) -> impl Strategy<Value = CoreStmt> {
    proptest::sample::subsequence((0..dim).collect::<Vec<_>>(), 1..=dim.min(2))
        .prop_flat_map(|cs| {
            let n = cs.len();
            (Just(cs), proptest::collection::vec(prop_oneof![-2i64..=-1, 1i64..=2], n))
        })
        .prop_map(|(cs, amounts)| CoreStmt::Update(cs.into_iter().zip(amounts).collect()))
}

fn stmt(dim: usize) -> impl Strategy<Value = CoreStmt> {
    update(dim).prop_recursive(2, 8, 3, move |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..3).prop_map(CoreStmt::looped),
            (
                proptest::collection::vec(inner.clone(), 0..3),
                proptest::collection::vec(inner, 0..3)
            )
                .prop_map(|(left, right)| CoreStmt::Choice {
                    label: None,
                    left,
                    right
                }),
        ]
    })
}

fn program() -> impl Strategy<Value = CoreProgram> {
    (1usize..=3)
        .prop_flat_map(|d| (Just(d), proptest::collection::vec(stmt(d), 0..5)))
        .prop_map(|(d, body)| CoreProgram {
            name: "p".into(),
            counters: (0..d).map(|i| format!("x{i}")).collect(),
            body,
        })
}

fn small_vass() -> impl Strategy<Value = Vass> {
    (1usize..=4, 1usize..=2).prop_flat_map(|(states, dim)| {
        proptest::collection::vec(
            (0..states, proptest::collection::vec(-1i64..=2, dim), 0..states),
            0..7,
        )
        .prop_map(move |ts| {
            let mut v = Vass::new("r", dim).unwrap();
            for s in 0..states {
                v.add_state(format!("s{s}")).unwrap();
            }
            for (f, e, t) in ts {
                v.add_transition(f, e, t).unwrap();
            }
            v.set_initial(0);
            v
        })
    })
}

/// Flatness by brute force: enumerate simple cycles as transition sets and
/// count how many pass through each state.
fn flat_by_cycles(v: &Vass) -> bool {
    let n = v.states().len();
    let ts = v.transitions();
    let mut cycles: BTreeSet<Vec<usize>> = BTreeSet::new();
    fn dfs(
        ts: &[vasslab::vass::Transition],
        start: usize,
        at: usize,
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        for (i, t) in ts.iter().enumerate() {
            if t.from != at {
                continue;
            }
            path.push(i);
            if t.to == start {
                let mut c = path.clone();
                c.sort();
                out.insert(c);
            } else if !seen[t.to] && t.to > start {
                seen[t.to] = true;
                dfs(ts, start, t.to, seen, path, out);
                seen[t.to] = false;
            }
            path.pop();
        }
    }
    for s in 0..n {
        let mut seen = vec![false; n];
        seen[s] = true;
        dfs(ts, s, s, &mut seen, &mut Vec::new(), &mut cycles);
    }
    (0..n).all(|s| {
        cycles
            .iter()
            .filter(|c| c.iter().any(|&i| ts[i].from == s))
            .count()
            <= 1
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_round_trip(cp in program()) {
        let text = cp.to_string();
        let again = expand(&parse(&text).unwrap(), &Env::new()).unwrap();
        prop_assert_eq!(again, cp);
    }

    #[test]
    fn expand_is_idempotent(cp in program()) {
        let once = expand(&cp.to_program(), &Env::new()).unwrap();
        let twice = expand(&once.to_program(), &Env::new()).unwrap();
        prop_assert_eq!(&once, &cp);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn compiled_vass_matches_interpreter(cp in program()) {
        let c = compile(&cp).unwrap();
        let d = cp.dimension();
        let caps = vec![3; d];
        let src = Configuration::new(c.entry, vec![0; d]);
        let exit = c.exit;
        let rep = explore_where(&c.vass, &src, &Caps::per_counter(caps.clone()), 1, &|x| x.state == exit).unwrap();
        prop_assert!(rep.exhausted);
        let got: BTreeSet<Vec<i64>> = rep.hits.iter().map(|h| h.counters.0.clone()).collect();
        let want: BTreeSet<Vec<i64>> = interpret(&cp.body, vec![0; d], &caps).into_iter().map(|(v, _)| v).collect();
        prop_assert_eq!(got, want);
        for w in &rep.witnesses {
            prop_assert!(c.vass.validate_run(w).is_ok());
        }
    }

    #[test]
    fn compiled_programs_are_flat_iff_cycles_say_so(cp in program()) {
        let c = compile(&cp).unwrap();
        prop_assert_eq!(c.vass.is_flat(), flat_by_cycles(&c.vass));
    }

    #[test]
    fn flatness_matches_cycle_enumeration(v in small_vass()) {
        prop_assert_eq!(v.is_flat(), flat_by_cycles(&v));
    }

    #[test]
    fn run_effect_is_additive(v in small_vass(), picks in proptest::collection::vec(0usize..16, 0..12)) {
        let d = v.dimension();
        let start = Configuration::new(0, vec![2; d]);
        let mut cur = start.clone();
        let mut steps = Vec::new();
        for p in picks {
            let enabled: Vec<usize> = (0..v.transitions().len()).filter(|&t| v.fire(&cur, t).is_ok()).collect();
            if enabled.is_empty() {
                break;
            }
            let t = enabled[p % enabled.len()];
            cur = v.fire(&cur, t).unwrap();
            steps.push(t);
        }
        let run = Run { start: start.clone(), steps: steps.clone() };
        let (end, effect) = v.validate_run(&run).unwrap();
        prop_assert_eq!(&end, &cur);
        let mut sum = vec![0i64; d];
        for &t in &steps {
            for (s, e) in sum.iter_mut().zip(v.transitions()[t].effect.iter()) {
                *s += e;
            }
        }
        prop_assert_eq!(&effect.0, &sum);
        let diff: Vec<i64> = end.counters.iter().zip(start.counters.iter()).map(|(a, b)| a - b).collect();
        prop_assert_eq!(effect.0, diff);
    }

    #[test]
    fn explore_is_monotone_in_caps(v in small_vass(), cap in 0i64..4, extra in 1i64..3) {
        let d = v.dimension();
        let src = Configuration::new(0, vec![0; d]);
        let small = explore(&v, &src, &Caps::uniform(d, cap), 1).unwrap();
        let large = explore(&v, &src, &Caps::uniform(d, cap + extra), 1).unwrap();
        prop_assert!(small.exhausted && large.exhausted);
        let big: BTreeSet<_> = large.hits.iter().cloned().collect();
        prop_assert!(small.hits.iter().all(|c| big.contains(c)));
    }

    #[test]
    fn reports_do_not_depend_on_jobs(v in small_vass(), cap in 1i64..5) {
        let d = v.dimension();
        let src = Configuration::new(0, vec![0; d]);
        let caps = Caps::uniform(d, cap);
        let one = explore_where(&v, &src, &caps, 1, &|c| c.state + 1 == v.states().len()).unwrap();
        let many = explore_where(&v, &src, &caps, 3, &|c| c.state + 1 == v.states().len()).unwrap();
        prop_assert_eq!(one.render(&v), many.render(&v));
    }
}
