//! Checks that tie the constructions to their contracts: structural facts,
//! grids compared against independent oracles, and replayed witnesses.
//!
//! Every suite produces a deterministic text report. Explorations are
//! exhaustive only within the caps each suite states.

pub mod oracle;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::gadgets::{instrument_ctrl, CtrlSpec, AMP_MAIN};
use crate::lang::{compile, expand, parse, CoreProgram, CoreStmt, Env, Stmt, Strategy};
use crate::reach::{
    ca_accepting_run_search, canonical_witness, explore_where, find_run,
    mutate_and_check, witness_with, Caps, Canonical,
};
use crate::reductions::{
    ca_to_vass_pair, ca_to_vass_triple, expspace_guess, subset_sum_to_vass, PumpParams, Spec,
    SubsetSumInstance, TowerParams, GUESS, MAIN,
};
use crate::vass::{CounterAutomaton, Run, Vass};
use oracle::{automaton_grid, dfs_accepting, interpret, subset_sum_brute};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Worker threads for explorations and grids.
    pub jobs: usize,
    /// Seed for randomised suites.
    pub seed: u64,
    /// Node budget per exploration.
    pub budget: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            jobs: 1,
            seed: 20_240_601,
            budget: crate::reach::DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    TwoPumps,
    PspaceEndpoint,
    SubsetSum,
    CtrlSoundness,
    Triples,
    Pairs,
    ExpspaceWitness,
    TowerWitness,
    Coefficients,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::TwoPumps,
        Suite::PspaceEndpoint,
        Suite::SubsetSum,
        Suite::CtrlSoundness,
        Suite::Triples,
        Suite::Pairs,
        Suite::ExpspaceWitness,
        Suite::TowerWitness,
        Suite::Coefficients,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::TwoPumps => "two-pumps",
            Suite::PspaceEndpoint => "pspace-endpoint",
            Suite::SubsetSum => "subset-sum",
            Suite::CtrlSoundness => "ctrl-soundness",
            Suite::Triples => "triples",
            Suite::Pairs => "pairs",
            Suite::ExpspaceWitness => "expspace-witness",
            Suite::TowerWitness => "tower-witness",
            Suite::Coefficients => "coefficients",
        }
    }

    /// Acceptance criterion the suite decides.
    pub fn criterion(self) -> u8 {
        match self {
            Suite::TwoPumps => 1,
            Suite::PspaceEndpoint => 2,
            Suite::SubsetSum => 3,
            Suite::CtrlSoundness => 4,
            Suite::Triples | Suite::Pairs => 5,
            Suite::ExpspaceWitness => 6,
            Suite::TowerWitness => 7,
            Suite::Coefficients => 8,
        }
    }

    pub fn from_name(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub pass: bool,
    pub lines: Vec<String>,
}

impl SuiteReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "[{}] criterion {} {}\n",
            self.suite.name(),
            self.suite.criterion(),
            if self.pass { "PASS" } else { "FAIL" }
        );
        for l in &self.lines {
            let _ = writeln!(out, "  {l}");
        }
        out
    }
}

pub fn render_all(reports: &[SuiteReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.render());
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    let _ = writeln!(out, "summary {passed}/{} suites passed", reports.len());
    out
}

pub fn run(suite: Suite, opts: &VerifyOptions) -> SuiteReport {
    let mut lines = Vec::new();
    let pass = match suite {
        Suite::TwoPumps => two_pumps_shape(&mut lines),
        Suite::PspaceEndpoint => pspace_endpoint(opts, &mut lines),
        Suite::SubsetSum => subset_sum_grid(opts, &mut lines),
        Suite::CtrlSoundness => ctrl_soundness(opts, &mut lines),
        Suite::Triples => triples_grid(opts, &mut lines),
        Suite::Pairs => pairs_grid(opts, &mut lines),
        Suite::ExpspaceWitness => expspace_witness(opts, &mut lines),
        Suite::TowerWitness => tower_witness(&mut lines),
        Suite::Coefficients => coefficients(&mut lines),
    };
    SuiteReport { suite, pass, lines }
}

pub fn run_many(suites: &[Suite], opts: &VerifyOptions) -> Vec<SuiteReport> {
    suites.iter().map(|&s| run(s, opts)).collect()
}

/// Runs `f` over `items` on `jobs` threads, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(|| items.par_iter().map(&f).collect())
}

pub const TWO_PUMPS: &str = "program pumps() counters x y {
  x += 1;
  loop { x -= 1, y += 1; }
  loop { x += 2, y -= 1; }
  loop { x -= 1, y += 1; }
  loop { x += 2, y -= 1; }
}
";

/// Transitions with states renamed by first appearance in a breadth-first
/// walk from the initial state (outgoing edges in declaration order).
pub fn canonical_edges(v: &Vass) -> Vec<(usize, Vec<i64>, usize)> {
    let out = v.outgoing();
    let mut name = vec![usize::MAX; v.states().len()];
    let mut order = std::collections::VecDeque::new();
    let start = v.initial().unwrap_or(0);
    name[start] = 0;
    order.push_back(start);
    let mut next = 1;
    let mut edges = Vec::new();
    while let Some(s) = order.pop_front() {
        for &t in &out[s] {
            let tr = &v.transitions()[t];
            if name[tr.to] == usize::MAX {
                name[tr.to] = next;
                next += 1;
                order.push_back(tr.to);
            }
            edges.push((name[s], tr.effect.0.clone(), name[tr.to]));
        }
    }
    edges
}

fn two_pumps_shape(lines: &mut Vec<String>) -> bool {
    let c = match parse(TWO_PUMPS)
        .map_err(|e| e.to_string())
        .and_then(|p| expand(&p, &Env::new()).map_err(|e| e.to_string()))
        .and_then(|cp| compile(&cp).map_err(|e| e.to_string()))
    {
        Ok(c) => c,
        Err(e) => {
            lines.push(format!("compile error: {e}"));
            return false;
        }
    };
    let expected: Vec<(usize, Vec<i64>, usize)> = vec![
        (0, vec![1, 0], 1),
        (1, vec![-1, 1], 1),
        (1, vec![0, 0], 2),
        (2, vec![2, -1], 2),
        (2, vec![0, 0], 3),
        (3, vec![-1, 1], 3),
        (3, vec![0, 0], 4),
        (4, vec![2, -1], 4),
    ];
    let states = c.vass.states().len();
    let transitions = c.vass.transitions().len();
    let got = canonical_edges(&c.vass);
    let mut sorted_got = got.clone();
    sorted_got.sort();
    let mut sorted_exp = expected.clone();
    sorted_exp.sort();
    lines.push(format!("states={states} transitions={transitions}"));
    let loops: Vec<String> = got
        .iter()
        .filter(|e| e.0 == e.2)
        .map(|e| fmt_vec(&e.1))
        .collect();
    lines.push(format!("self-loops {}", loops.join(" ")));
    let chain: Vec<String> = got
        .iter()
        .filter(|e| e.0 != e.2)
        .map(|e| fmt_vec(&e.1))
        .collect();
    lines.push(format!("chain {}", chain.join(" ")));
    let iso = sorted_got == sorted_exp;
    lines.push(format!("isomorphic to expected shape: {iso}"));
    states == 5 && transitions == 8 && iso && c.vass.is_flat()
}

fn fmt_vec(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(i64::to_string).collect();
    format!("({})", parts.join(","))
}

/// Per-counter maxima along a run.
pub fn run_maxima(v: &Vass, run: &Run) -> Vec<i64> {
    let mut state = run.start.state;
    let mut c = run.start.counters.0.clone();
    let mut max = c.clone();
    for &t in &run.steps {
        v.fire_in_place(&mut state, &mut c, t).expect("validated run");
        for (m, x) in max.iter_mut().zip(&c) {
            *m = (*m).max(*x);
        }
    }
    max
}

fn pspace_endpoint(opts: &VerifyOptions, lines: &mut Vec<String>) -> bool {
    let w = match canonical_witness(&Spec::Pspace(PumpParams::new(1, 1))) {
        Ok(w) => w,
        Err(e) => {
            lines.push(format!("no canonical witness: {e}"));
            return false;
        }
    };
    let v = &w.construction.vass;
    let caps: Vec<i64> = run_maxima(v, &w.certificate.run).iter().map(|m| 4 * m).collect();
    lines.push(format!("caps {} (4x canonical maxima)", fmt_vec(&caps)));
    let fin = w.construction.target.state;
    let src = w.certificate.run.start.clone();
    let caps = Caps::per_counter(caps).with_budget(opts.budget);
    let rep = match explore_where(v, &src, &caps, opts.jobs, &|c| c.state == fin) {
        Ok(r) => r,
        Err(e) => {
            lines.push(format!("exploration error: {e}"));
            return false;
        }
    };
    let zero: Vec<_> = rep.hits.iter().filter(|c| c.counters[4] == 0).collect();
    let bad: Vec<_> = zero
        .iter()
        .filter(|c| c.counters.0[..4] != [8, 64, 0, 0])
        .collect();
    lines.push(format!("explored={} exhausted={}", rep.explored, rep.exhausted));
    lines.push(format!(
        "final-state hits={} with x5=0: {}",
        rep.hits.len(),
        zero.iter().map(|c| v.show(c)).collect::<Vec<_>>().join(" ")
    ));
    for b in &bad {
        lines.push(format!("unexpected endpoint {}", v.show(b)));
    }
    lines.push("verification is exhaustive within the caps only".into());
    rep.exhausted && !zero.is_empty() && bad.is_empty()
}

/// Every instance with at most three values, all numbers in 0..=7.
pub fn subset_sum_instances() -> Vec<SubsetSumInstance> {
    let mut out = Vec::new();
    for n in 0..=3u32 {
        for target in 0..8u64 {
            for code in 0..8u64.pow(n) {
                let values: Vec<u64> = (0..n).map(|i| code / 8u64.pow(i) % 8).collect();
                out.push(SubsetSumInstance::new(target, &values));
            }
        }
    }
    out
}

/// Caps that every run reaching 0^4 respects. Such runs pass every test
/// honestly, so x < 2^k, y <= 2^(k-1) and z <= s0. Along an honest prefix the
/// controlling counter equals the sum over x, y of value times tests still
/// ahead, at most k(n+1) 2^k.
pub fn subset_sum_caps(inst: &SubsetSumInstance) -> Vec<i64> {
    let k = inst.width() as i64;
    let n = inst.values.len() as i64;
    let p = 1i64 << k;
    vec![p - 1, p / 2, inst.target as i64, k * (n + 1) * p]
}

fn subset_sum_grid(opts: &VerifyOptions, lines: &mut Vec<String>) -> bool {
    let instances = subset_sum_instances();
    let budget = opts.budget;
    let results = par_map(&instances, opts.jobs, |inst| -> Result<(bool, bool, bool, usize), String> {
        let c = subset_sum_to_vass(inst).map_err(|e| e.to_string())?;
        let shape = c.vass.is_flat() && c.vass.dimension() == 4;
        let src = c.source.config().expect("exact source");
        let trg = c.target.config().expect("exact target");
        let caps = Caps::per_counter(subset_sum_caps(inst)).with_budget(budget);
        let (run, rep) = find_run(&c.vass, &src, &trg, &caps, 1).map_err(|e| e.to_string())?;
        if run.is_none() && !rep.exhausted {
            return Err("budget exhausted".into());
        }
        Ok((shape, run.is_some(), subset_sum_brute(inst), rep.explored))
    });
    let mut agree = 0;
    let mut positive = 0;
    let mut fails = Vec::new();
    let mut explored = 0usize;
    for (inst, r) in instances.iter().zip(&results) {
        match r {
            Ok((shape, got, want, n)) => {
                explored += n;
                if *shape && got == want {
                    agree += 1;
                    positive += *want as usize;
                } else {
                    fails.push(format!(
                        "s0={} S={:?} flat4={shape} vass={got} oracle={want}",
                        inst.target, inst.values
                    ));
                }
            }
            Err(e) => fails.push(format!("s0={} S={:?} {e}", inst.target, inst.values)),
        }
    }
    lines.push(format!(
        "instances={} agree={agree} positive={positive} explored={explored}",
        instances.len()
    ));
    lines.push("caps: x < 2^k, y <= 2^(k-1), z <= s0, c <= k(n+1)2^k; exhaustive within caps".into());
    for f in fails.iter().take(20) {
        lines.push(format!("mismatch {f}"));
    }
    fails.is_empty()
}

/// Random ground program over `controlled` counters x1.. plus a controlling
/// counter `c`, with at most 8 statements and 3 top-level ctrl markers.
pub fn random_marker_program(rng: &mut impl Rng) -> CoreProgram {
    let m = rng.gen_range(1..=3usize);
    let ctrl = m;
    let mut counters: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    counters.push("c".into());
    let update = |rng: &mut dyn rand::RngCore| {
        let terms = rng.gen_range(1..=2usize);
        let mut entries: Vec<(usize, i64)> = Vec::new();
        for _ in 0..terms {
            let x = rng.gen_range(0..m);
            let a = [-2i64, -1, 1, 2][rng.gen_range(0..4)];
            entries.push((x, a));
        }
        CoreStmt::Update(entries)
    };
    let mut budget = rng.gen_range(1..=8usize);
    let mut markers = 0;
    let mut body = Vec::new();
    while budget > 0 {
        let kind = rng.gen_range(0..4);
        match kind {
            0 => {
                body.push(update(rng));
                budget -= 1;
            }
            1 => {
                let mut inner = vec![update(rng)];
                if budget >= 3 && rng.gen_bool(0.3) {
                    inner.push(update(rng));
                    budget -= 1;
                }
                body.push(CoreStmt::Loop {
                    label: None,
                    body: inner,
                });
                budget -= 1;
            }
            2 if budget >= 3 => {
                let left = vec![update(rng)];
                let right = if rng.gen_bool(0.5) { vec![update(rng)] } else { vec![] };
                budget -= 1 + left.len() + right.len();
                body.push(CoreStmt::Choice {
                    label: None,
                    left,
                    right,
                });
            }
            _ if markers < 3 => {
                body.push(CoreStmt::ZeroTest {
                    counter: rng.gen_range(0..m),
                    strategy: Some(Strategy::Ctrl(ctrl)),
                });
                markers += 1;
                budget -= 1;
            }
            _ => {
                body.push(update(rng));
                budget -= 1;
            }
        }
    }
    CoreProgram {
        name: "rand".into(),
        counters,
        body,
    }
}

fn ctrl_soundness(opts: &VerifyOptions, lines: &mut Vec<String>) -> bool {
    const PROGRAMS: usize = 200;
    const CAP: i64 = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let programs: Vec<CoreProgram> = (0..PROGRAMS).map(|_| random_marker_program(&mut rng)).collect();
    let budget = opts.budget;
    let results = par_map(&programs, opts.jobs, |cp| -> Result<(usize, usize, usize, bool), String> {
        let m = cp.dimension() - 1;
        let names: Vec<&str> = cp.counters[..m].iter().map(String::as_str).collect();
        let inst = instrument_ctrl(cp, &CtrlSpec::new("c", &names)).map_err(|e| e.to_string())?;
        let compiled = compile(&inst).map_err(|e| e.to_string())?;
        let caps = vec![CAP; m + 1];
        let src = crate::vass::Configuration::new(compiled.entry, vec![0; m + 1]);
        let exit = compiled.exit;
        let rep = explore_where(
            &compiled.vass,
            &src,
            &Caps::per_counter(caps.clone()).with_budget(budget),
            1,
            &|c| c.state == exit,
        )
        .map_err(|e| e.to_string())?;
        if !rep.exhausted {
            return Err("budget exhausted".into());
        }
        let vass_ends: BTreeSet<Vec<i64>> = rep.hits.iter().map(|c| c.counters.0.clone()).collect();
        let oracle = interpret(&inst.body, vec![0; m + 1], &caps);
        let oracle_ends: BTreeSet<Vec<i64>> = oracle.iter().map(|(v, _)| v.clone()).collect();
        let controlled_zero: Vec<&Vec<i64>> = vass_ends.iter().filter(|v| v[m] == 0).collect();
        let violations = controlled_zero
            .iter()
            .filter(|v| oracle.contains(&((**v).clone(), false)))
            .count();
        let markers = count_markers(&cp.body);
        Ok((markers, controlled_zero.len(), violations, vass_ends == oracle_ends))
    });
    let mut markers = 0;
    let mut checked = 0;
    let mut violations = 0;
    let mut mismatches = 0;
    let mut errors = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok((mk, ch, vi, same)) => {
                markers += mk;
                checked += ch;
                violations += vi;
                if !same {
                    mismatches += 1;
                    errors.push(format!("program {i}: exploration and interpreter disagree"));
                }
                if *vi > 0 {
                    errors.push(format!("program {i}: {vi} dishonest ends with ctrl = 0"));
                }
            }
            Err(e) => errors.push(format!("program {i}: {e}")),
        }
    }
    lines.push(format!(
        "programs={PROGRAMS} seed={} caps={CAP} markers={markers} ctrl-zero-ends={checked}",
        opts.seed
    ));
    lines.push(format!("violations={violations} set-mismatches={mismatches}"));
    for e in errors.iter().take(20) {
        lines.push(e.clone());
    }
    errors.is_empty()
}

fn count_markers(body: &[CoreStmt]) -> usize {
    body.iter()
        .map(|s| match s {
            CoreStmt::ZeroTest { .. } => 1,
            CoreStmt::Loop { body, .. } => count_markers(body),
            CoreStmt::Choice { left, right, .. } => count_markers(left) + count_markers(right),
            _ => 0,
        })
        .sum()
}

fn bfs_oracle(a: &CounterAutomaton, bound: i64, tests: i64) -> bool {
    ca_accepting_run_search(a, bound, tests, &Caps::unbounded())
        .expect("unbounded caps are valid")
        .0
        .is_some()
}

/// Endpoint reachability with every counter capped at `cap`.
fn vass_reach(c: &crate::reductions::Construction, cap: i64, budget: usize) -> Result<bool, String> {
    let src = c.source.config().expect("exact source");
    let trg = c.target.config().expect("exact target");
    let caps = Caps::uniform(c.vass.dimension(), cap).with_budget(budget);
    let (run, rep) = find_run(&c.vass, &src, &trg, &caps, 1).map_err(|e| e.to_string())?;
    if run.is_none() && !rep.exhausted {
        return Err("budget exhausted".into());
    }
    Ok(run.is_some())
}

fn triples_grid(opts: &VerifyOptions, lines: &mut Vec<String>) -> bool {
    let grid = automaton_grid();
    let mut cases = Vec::new();
    for a in &grid {
        for b in [2i64, 3] {
            for c in [1i64, 2] {
                cases.push((a, b, c));
            }
        }
    }
    let budget = opts.budget;
    let results = par_map(&cases, opts.jobs, |&(a, b, c)| -> Result<(bool, bool, bool), String> {
        let want = bfs_oracle(a, b, c);
        let second = dfs_accepting(a, b, c);
        let cons = ca_to_vass_triple(a, b, c).map_err(|e| e.to_string())?;
        // No counter ever exceeds its initial value: b + x stays at B, c and
        // d only shrink.
        Ok((want, second, vass_reach(&cons, 2 * b * c, budget)?))
    });
    grid_summary(lines, &cases, &results, |&(a, b, c)| {
        format!("{} B={b} C={c}", a.system().name())
    })
}

fn pairs_grid(opts: &VerifyOptions, lines: &mut Vec<String>) -> bool {
    let grid = automaton_grid();
    let mut cases = Vec::new();
    for a in &grid {
        for b in [2i64, 3] {
            cases.push((a, b));
        }
    }
    let budget = opts.budget;
    // The construction is exact only for B-bounded automata. Its answer lies
    // between "a run below B with at most B tests" and "a run below 2B+1 with
    // at most 2B tests"; automata where the two differ are outside the promise.
    let results = par_map(&cases, opts.jobs, |&(a, b)| -> Result<Option<(bool, bool, bool)>, String> {
        let lo = bfs_oracle(a, b, b);
        let hi = bfs_oracle(a, 2 * b + 1, 2 * b);
        if lo != hi {
            return Ok(None);
        }
        let second = dfs_accepting(a, b, b);
        let cons = ca_to_vass_pair(a, b).map_err(|e| e.to_string())?;
        // b + x never grows past 2B and c never exceeds 4B^2 + 1, the
        // extra unit coming from the drain's artificial tests.
        Ok(Some((lo, second, vass_reach(&cons, 4 * b * b + 1, budget)?)))
    });
    let skipped = results.iter().filter(|r| matches!(r, Ok(None))).count();
    type Verdict = Result<(bool, bool, bool), String>;
    let kept: Vec<(&(&CounterAutomaton, i64), Verdict)> = cases
        .iter()
        .zip(results)
        .filter_map(|(c, r)| match r {
            Ok(None) => None,
            Ok(Some(x)) => Some((c, Ok(x))),
            Err(e) => Some((c, Err(e))),
        })
        .collect();
    lines.push(format!("outside promise (skipped)={skipped}"));
    let (cases, results): (Vec<_>, Vec<_>) = kept.into_iter().map(|(c, r)| (*c, r)).unzip();
    grid_summary(lines, &cases, &results, |&(a, b)| format!("{} B={b}", a.system().name()))
}

fn grid_summary<T>(
    lines: &mut Vec<String>,
    cases: &[T],
    results: &[Result<(bool, bool, bool), String>],
    label: impl Fn(&T) -> String,
) -> bool {
    let mut agree = 0;
    let mut positive = 0;
    let mut incoherent = 0;
    let mut fails = Vec::new();
    for (case, r) in cases.iter().zip(results) {
        match r {
            Ok((want, second, got)) => {
                if want != second {
                    incoherent += 1;
                    fails.push(format!("{}: oracles disagree", label(case)));
                } else if want != got {
                    fails.push(format!("{}: vass={got} oracle={want}", label(case)));
                } else {
                    agree += 1;
                    positive += *want as usize;
                }
            }
            Err(e) => fails.push(format!("{}: {e}", label(case))),
        }
    }
    lines.push(format!(
        "cases={} agree={agree} accepting={positive} oracle-disagreements={incoherent}",
        cases.len()
    ));
    for f in fails.iter().take(20) {
        lines.push(format!("mismatch {f}"));
    }
    fails.is_empty()
}

fn expspace_witness(opts: &VerifyOptions, lines: &mut Vec<String>) -> bool {
    let p = PumpParams::new(1, 1);
    let w = match canonical_witness(&Spec::Expspace(p)) {
        Ok(w) => w,
        Err(e) => {
            lines.push(format!("no canonical witness: {e}"));
            return false;
        }
    };
    let v = &w.construction.vass;
    let valid = w.certificate.check(&w.construction).is_ok();
    let end = &w.certificate.endpoint;
    let exact = end.state == w.construction.target.state && end.counters.0 == [96, 9216, 0, 0, 0, 0];
    lines.push(format!(
        "guess B={} length={} endpoint={} valid={valid}",
        expspace_guess(p).unwrap_or(-1),
        w.certificate.run.len(),
        v.show(end)
    ));
    let m = mutate_and_check(&w.certificate, &w.construction, 100, opts.seed);
    lines.push(format!(
        "mutants={} rejected={} off-contract={} survivors={}",
        m.tried,
        m.rejected,
        m.off_contract,
        m.survivors.len()
    ));
    let mut wrong = Canonical::new().repeat(GUESS, [9311]).repeat(MAIN, [2]);
    let wrong_fails = match Spec::Expspace(p).build() {
        Ok(cons) => match witness_with(cons, &mut wrong) {
            Ok(_) => false,
            Err(e) => {
                lines.push(format!("guess 9311: {e}"));
                true
            }
        },
        Err(_) => false,
    };
    valid && exact && m.tried == 100 && m.survivors.is_empty() && wrong_fails
}

fn tower_witness(lines: &mut Vec<String>) -> bool {
    let p = TowerParams::new(1, 8);
    let w = match canonical_witness(&Spec::Tower(p)) {
        Ok(w) => w,
        Err(e) => {
            lines.push(format!("no canonical witness: {e}"));
            return false;
        }
    };
    let v = &w.construction.vass;
    let valid = w.certificate.check(&w.construction).is_ok();
    let x = &w.certificate.endpoint.counters.0;
    let shape = x[0] == 256 && x[2] == 256 * x[1] && x[3..].iter().all(|&c| c == 0);
    lines.push(format!(
        "length={} endpoint={} valid={valid}",
        w.certificate.run.len(),
        v.show(&w.certificate.endpoint)
    ));
    let main = w.iterations.get(AMP_MAIN).cloned().unwrap_or_default();
    let tests = w
        .certificate
        .run
        .steps
        .iter()
        .filter(|&&t| v.transitions()[t].effect[0] == -2)
        .count() as u64;
    let iterations: u64 = main.iter().sum();
    let per_iteration = tests.checked_div(iterations).unwrap_or(0);
    let markers = amp_main_markers(&w.construction).unwrap_or(0);
    lines.push(format!(
        "main-loop iterations={iterations} (seed/8={}) tests={tests} per-iteration={per_iteration} markers-in-body={markers}",
        p.seed / 8
    ));
    let literal = canonical_witness(&Spec::Tower(TowerParams::new(1, 1)));
    let infeasible = matches!(literal, Err(crate::reach::WitnessError::InfeasibleParams(_)));
    match &literal {
        Err(e) => lines.push(format!("seed 1: {e}")),
        Ok(_) => lines.push("seed 1: unexpected witness".into()),
    }
    valid
        && shape
        && iterations == (p.seed / 8) as u64
        && tests == 4 * iterations
        && tests.is_multiple_of(4)
        && markers == 4
        && infeasible
}

/// Zero-test markers inside the amplifier's main loop, before elimination.
fn amp_main_markers(c: &crate::reductions::Construction) -> Option<usize> {
    fn find(body: &[Stmt]) -> Option<usize> {
        for s in body {
            match s {
                Stmt::Loop { label, body } if label.as_deref() == Some(AMP_MAIN) => {
                    return Some(
                        body.iter()
                            .filter(|s| matches!(s, Stmt::ZeroTest { .. }))
                            .count(),
                    )
                }
                Stmt::Loop { body, .. } | Stmt::For { body, .. } => {
                    if let Some(n) = find(body) {
                        return Some(n);
                    }
                }
                Stmt::Choice { left, right, .. } => {
                    if let Some(n) = find(left).or_else(|| find(right)) {
                        return Some(n);
                    }
                }
                _ => {}
            }
        }
        None
    }
    find(&c.program.as_ref()?.body)
}

/// Controlling-counter entry of an update statement, or of the single
/// update inside a loop.
fn ctrl_entry(s: &CoreStmt, ctrl: usize) -> Option<i64> {
    match s {
        CoreStmt::Update(e) => Some(e.iter().filter(|(c, _)| *c == ctrl).map(|(_, a)| a).sum()),
        CoreStmt::Loop { body, .. } => match body.as_slice() {
            [u @ CoreStmt::Update(_)] => ctrl_entry(u, ctrl),
            _ => None,
        },
        _ => None,
    }
}

/// Checks one generator block against the closed forms. Returns the number
/// of coefficients compared, or a description of the first difference.
fn check_block(
    block: &[CoreStmt],
    value: u64,
    k: i64,
    n: i64,
    i: i64,
) -> Result<usize, String> {
    let ctrl = 3;
    let bit = |j: i64| ((value >> j) & 1) as i64;
    let at = |pos: usize| -> Result<i64, String> {
        block
            .get(pos)
            .and_then(|s| ctrl_entry(s, ctrl))
            .ok_or_else(|| format!("no update at position {pos}"))
    };
    let mut expect = vec![(0usize, bit(k - 1) * k * (n - i + 1), "leading bit".to_string())];
    let mut pos = 1;
    for j in (0..k - 1).rev() {
        expect.push((pos, -(n + 1 - i), format!("move loop j={j}")));
        expect.push((pos + 2, (k + 1) * (n - i) + (j + 1), format!("doubling loop j={j}")));
        expect.push((pos + 4, bit(j) * (k * (n - i) + (j + 1)), format!("bit update j={j}")));
        pos += 5;
    }
    expect.push((pos, -(k * (n - i) + 1), "drain loop".to_string()));
    if block.len() != pos + 2 {
        return Err(format!("block has {} statements, expected {}", block.len(), pos + 2));
    }
    for (p, want, what) in &expect {
        let got = at(*p)?;
        if got != *want {
            return Err(format!("{what}: derived {got}, closed form {want}"));
        }
    }
    Ok(expect.len())
}

fn coefficients(lines: &mut Vec<String>) -> bool {
    let mut compared = 0usize;
    let mut fails = Vec::new();
    for k in 2..=4u32 {
        for n in 1..=3usize {
            let top = (1u64 << k) - 1;
            let values: Vec<u64> = (0..n as u64).map(|i| (5 * i + 3) % (top + 1)).collect();
            let inst = SubsetSumInstance::new(top, &values);
            let Some(core) = subset_sum_to_vass(&inst).ok().and_then(|c| c.core) else {
                fails.push(format!("k={k} n={n}: construction failed"));
                continue;
            };
            let ki = k as i64;
            let len = 5 * (ki as usize - 1) + 3;
            let ni = n as i64;
            match check_block(&core.body[..len.min(core.body.len())], top, ki, ni, 0) {
                Ok(c) => compared += c,
                Err(e) => fails.push(format!("k={k} n={n} i=0: {e}")),
            }
            for (idx, s) in core.body[len..].iter().enumerate() {
                let i = idx as i64 + 1;
                let CoreStmt::Choice { left, right, .. } = s else {
                    fails.push(format!("k={k} n={n} i={i}: not a choice"));
                    continue;
                };
                for (side, b) in [("take", left), ("skip", right)] {
                    match check_block(b, values[idx], ki, ni, i) {
                        Ok(c) => compared += c,
                        Err(e) => fails.push(format!("k={k} n={n} i={i} {side}: {e}")),
                    }
                }
            }
        }
    }
    lines.push(format!("subset-sum: coefficients compared={compared} (k=2..4, n=1..3)"));
    let mut p_compared = 0usize;
    for s in 1..=3u32 {
        for n in 1..=3u32 {
            let Some(core) = crate::reductions::pspace_pump(PumpParams::new(s, n))
                .ok()
                .and_then(|c| c.core)
            else {
                fails.push(format!("pspace s={s} n={n}: construction failed"));
                continue;
            };
            let (si, ni) = (s as i64, n as i64);
            let line1 = ctrl_entry(&core.body[0], 4);
            let want1 = 4 * si * ni + 16 * si * si * ni;
            if line1 != Some(want1) {
                fails.push(format!("pspace s={s} n={n} initial update: derived {line1:?}, expected {want1}"));
            }
            p_compared += 1;
            for i in 1..=ni {
                let base = 1 + 8 * (i - 1) as usize;
                let want = [n as i64 + 1 - i, -2, ni - i, 2 * ni - 2 * i - 1];
                for (off, w) in want.iter().enumerate() {
                    let got = core.body.get(base + 2 * off).and_then(|s| ctrl_entry(s, 4));
                    if got != Some(*w) {
                        fails.push(format!(
                            "pspace s={s} n={n} i={i} loop {}: derived {got:?}, closed form {w}",
                            off + 1
                        ));
                    }
                    p_compared += 1;
                }
            }
        }
    }
    lines.push(format!("pspace: coefficients compared={p_compared} (s=1..3, n=1..3)"));
    lines.push("pspace initial update: derived 4sn + 16s^2 n asserted".into());
    for f in fails.iter().take(20) {
        lines.push(format!("mismatch {f}"));
    }
    fails.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_pumps_suite() {
        let r = run(Suite::TwoPumps, &VerifyOptions::default());
        assert!(r.pass, "{}", r.render());
    }

    #[test]
    fn coefficient_suite() {
        let r = run(Suite::Coefficients, &VerifyOptions::default());
        assert!(r.pass, "{}", r.render());
    }

    #[test]
    fn tower_suite() {
        let r = run(Suite::TowerWitness, &VerifyOptions::default());
        assert!(r.pass, "{}", r.render());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::from_name(s.name()), Some(s));
        }
    }

    #[test]
    fn drain_empties_pair_counters() {
        let a = &automaton_grid()[0];
        for b in 1..=3 {
            let c = ca_to_vass_pair(a, b).unwrap();
            assert_eq!(vass_reach(&c, 4 * b * b + 1, 100_000), Ok(true), "B={b}");
        }
    }

    #[test]
    fn subset_sum_caps_do_not_change_answers() {
        for (t, vs) in [(3u64, vec![1u64, 2]), (5, vec![2, 2]), (6, vec![3, 5, 1]), (0, vec![7])] {
            let inst = SubsetSumInstance::new(t, &vs);
            let c = subset_sum_to_vass(&inst).unwrap();
            let src = c.source.config().unwrap();
            let trg = c.target.config().unwrap();
            let loose: Vec<i64> = subset_sum_caps(&inst).iter().map(|x| 2 * x + 2).collect();
            let tight = find_run(&c.vass, &src, &trg, &Caps::per_counter(subset_sum_caps(&inst)), 1).unwrap();
            let wide = find_run(&c.vass, &src, &trg, &Caps::per_counter(loose), 1).unwrap();
            assert!(tight.1.exhausted || tight.0.is_some());
            assert_eq!(tight.0.is_some(), wide.0.is_some());
            assert_eq!(tight.0.is_some(), subset_sum_brute(&inst));
        }
    }

    #[test]
    fn instance_count() {
        assert_eq!(subset_sum_instances().len(), 8 * (1 + 8 + 64 + 512));
    }
}
