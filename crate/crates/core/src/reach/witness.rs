use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gadgets::{AMP_GUESS, AMP_MAIN};
use crate::lang::Frag;
use crate::reductions::{
    expspace_guess, Construction, ReductionError, Spec, TowerParams, GUESS, MAIN, TOWER_GUESS,
};
use crate::text::{parse_config, parse_run, write_run, Manifest};
use crate::vass::{Configuration, FireError, Run, RunError, StateId, Vass};

/// Longest run the driver will build.
pub const STEP_LIMIT: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("construction `{0}` has no program to drive")]
    NoProgram(String),
    #[error("step {step}: {cause}")]
    Stuck { step: usize, cause: FireError },
    #[error("loop on transition {0} has no decrement and no label")]
    UnboundedLoop(usize),
    #[error("no decision for loop {0}")]
    UnexpectedLoop(String),
    #[error("no decision for choice {0}")]
    UnexpectedChoice(String),
    #[error("run would exceed {0} steps")]
    TooLong(usize),
    #[error("run ends at {0}, which violates the endpoint contract")]
    ContractViolated(String),
    #[error("replay failed at {0}")]
    Replay(#[from] RunError),
    #[error("certificate: {0}")]
    Certificate(String),
}

/// Decisions the driver cannot make by itself.
pub trait Policy {
    /// Whether to run iteration `iteration` (0-based) of a labelled loop or
    /// of any loop with more than one statement.
    fn again(&mut self, label: Option<&str>, iteration: u64, counters: &[i64])
        -> Result<bool, WitnessError>;
    /// Whether to take the left branch of a choice.
    fn left(&mut self, label: Option<&str>, counters: &[i64]) -> Result<bool, WitnessError>;
}

/// Table-driven policy: fixed iteration counts per label (one entry per
/// time the loop is reached), loops that run while a counter is positive,
/// and a queue of branch decisions.
#[derive(Clone, Debug, Default)]
pub struct Canonical {
    counts: BTreeMap<String, VecDeque<u64>>,
    current: BTreeMap<String, u64>,
    while_positive: BTreeMap<String, usize>,
    choices: VecDeque<bool>,
}

impl Canonical {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn repeat(mut self, label: &str, counts: impl IntoIterator<Item = u64>) -> Self {
        self.counts.entry(label.into()).or_default().extend(counts);
        self
    }

    pub fn while_positive(mut self, label: &str, counter: usize) -> Self {
        self.while_positive.insert(label.into(), counter);
        self
    }

    pub fn choose(mut self, picks: impl IntoIterator<Item = bool>) -> Self {
        self.choices.extend(picks);
        self
    }
}

fn name(label: Option<&str>) -> String {
    label.unwrap_or("<unlabelled>").to_string()
}

impl Policy for Canonical {
    fn again(
        &mut self,
        label: Option<&str>,
        iteration: u64,
        counters: &[i64],
    ) -> Result<bool, WitnessError> {
        let l = label.ok_or_else(|| WitnessError::UnexpectedLoop(name(label)))?;
        if let Some(&c) = self.while_positive.get(l) {
            return Ok(counters[c] > 0);
        }
        if iteration == 0 {
            let n = self
                .counts
                .get_mut(l)
                .and_then(VecDeque::pop_front)
                .ok_or_else(|| WitnessError::UnexpectedLoop(l.into()))?;
            self.current.insert(l.into(), n);
        }
        Ok(iteration < self.current[l])
    }

    fn left(&mut self, label: Option<&str>, _: &[i64]) -> Result<bool, WitnessError> {
        self.choices
            .pop_front()
            .ok_or_else(|| WitnessError::UnexpectedChoice(name(label)))
    }
}

#[derive(Clone, Debug)]
pub struct Driven {
    pub run: Run,
    pub end: Configuration,
    /// Iterations per labelled loop, one entry per time it was reached.
    pub iterations: BTreeMap<String, Vec<u64>>,
}

struct Driver<'a> {
    vass: &'a Vass,
    policy: &'a mut dyn Policy,
    state: StateId,
    counters: Vec<i64>,
    steps: Vec<usize>,
    iterations: BTreeMap<String, Vec<u64>>,
}

impl Driver<'_> {
    fn fire(&mut self, t: usize) -> Result<(), WitnessError> {
        self.vass
            .fire_in_place(&mut self.state, &mut self.counters, t)
            .map_err(|cause| WitnessError::Stuck {
                step: self.steps.len() + 1,
                cause,
            })?;
        self.steps.push(t);
        if self.steps.len() > STEP_LIMIT {
            return Err(WitnessError::TooLong(STEP_LIMIT));
        }
        Ok(())
    }

    fn record(&mut self, label: &Option<String>, n: u64) {
        if let Some(l) = label {
            self.iterations.entry(l.clone()).or_default().push(n);
        }
    }

    /// Largest number of times the self-loop `t` can fire from here.
    fn max_iterations(&self, t: usize) -> Result<u64, WitnessError> {
        let eff = &self.vass.transitions()[t].effect;
        eff.iter()
            .zip(&self.counters)
            .filter(|(&e, _)| e < 0)
            .map(|(&e, &v)| (v / -e) as u64)
            .min()
            .ok_or(WitnessError::UnboundedLoop(t))
    }

    fn block(&mut self, frags: &[Frag]) -> Result<(), WitnessError> {
        frags.iter().try_for_each(|f| self.frag(f))
    }

    fn frag(&mut self, f: &Frag) -> Result<(), WitnessError> {
        match f {
            Frag::Update(t) => self.fire(*t),
            Frag::SelfLoop { label, enter, body } => {
                if let Some(e) = enter {
                    self.fire(*e)?;
                }
                let mut n = 0;
                match label {
                    None => {
                        let k = self.max_iterations(*body)?;
                        if k as usize > STEP_LIMIT {
                            return Err(WitnessError::TooLong(STEP_LIMIT));
                        }
                        for _ in 0..k {
                            self.fire(*body)?;
                        }
                    }
                    Some(l) => {
                        while self.policy.again(Some(l), n, &self.counters)? {
                            self.fire(*body)?;
                            n += 1;
                        }
                    }
                }
                self.record(label, n);
                Ok(())
            }
            Frag::Loop {
                label,
                enter,
                body,
                back,
                exit,
            } => {
                if let Some(e) = enter {
                    self.fire(*e)?;
                }
                let mut n = 0;
                while self.policy.again(label.as_deref(), n, &self.counters)? {
                    self.block(body)?;
                    self.fire(*back)?;
                    n += 1;
                }
                self.record(label, n);
                self.fire(*exit)
            }
            Frag::Choice { label, left, right } => {
                let b = if self.policy.left(label.as_deref(), &self.counters)? {
                    left
                } else {
                    right
                };
                self.fire(b.enter)?;
                self.block(&b.body)?;
                self.fire(b.leave)
            }
            Frag::Nothing => Ok(()),
        }
    }
}

/// Builds the run described by `frags` from `start`. Unlabelled
/// single-transition loops fire as often as the counters allow; every
/// other decision is delegated to `policy`.
pub fn drive(
    vass: &Vass,
    frags: &[Frag],
    start: Configuration,
    policy: &mut dyn Policy,
) -> Result<Driven, WitnessError> {
    let mut d = Driver {
        vass,
        policy,
        state: start.state,
        counters: start.counters.0.clone(),
        steps: Vec::new(),
        iterations: BTreeMap::new(),
    };
    d.block(frags)?;
    let end = Configuration::new(d.state, d.counters);
    Ok(Driven {
        run: Run {
            start,
            steps: d.steps,
        },
        end,
        iterations: d.iterations,
    })
}

/// Guessed values for the tower: the initial C and the C' chosen at each
/// amplifier stage. The last stage keeps C' = 1; every earlier C is the
/// least value letting the next stage finish, (1 + 2^B) C' + 2^B.
pub fn tower_guesses(p: TowerParams) -> Result<(i64, Vec<i64>), WitnessError> {
    if !p.seed.is_multiple_of(8) || p.seed == 0 {
        return Err(WitnessError::InfeasibleParams(format!(
            "seed {}: each amplifier round spends 8 units of x1, so x1 can only drain to 0 \
             when the stage input is a multiple of 8",
            p.seed
        )));
    }
    let too_big = || WitnessError::InfeasibleParams("stage values exceed 64 bits".into());
    let mut inputs = vec![p.seed as i64];
    for _ in 1..p.n {
        let b = *inputs.last().unwrap();
        let next = u32::try_from(b)
            .ok()
            .and_then(|b| 1i64.checked_shl(b))
            .filter(|&v| v > 0)
            .ok_or_else(too_big)?;
        inputs.push(next);
    }
    let mut c = 1i64;
    let mut amp = vec![c];
    for &b in inputs.iter().rev() {
        let pow = u32::try_from(b)
            .ok()
            .and_then(|b| 1i64.checked_shl(b))
            .filter(|&v| v > 0)
            .ok_or_else(too_big)?;
        c = pow
            .checked_add(1)
            .and_then(|f| f.checked_mul(c))
            .and_then(|v| v.checked_add(pow))
            .ok_or_else(too_big)?;
        amp.push(c);
    }
    let c0 = amp.pop().unwrap();
    amp.reverse();
    let budget = (p.seed as i64).checked_mul(c0).ok_or_else(too_big)?;
    if budget as u64 > STEP_LIMIT as u64 {
        return Err(WitnessError::InfeasibleParams(format!(
            "the intended run needs more than {STEP_LIMIT} steps"
        )));
    }
    Ok((c0, amp))
}

/// The policy producing the intended run of a construction.
pub fn canonical_policy(spec: &Spec) -> Result<Canonical, WitnessError> {
    Ok(match spec {
        Spec::Pspace(_) => Canonical::new(),
        Spec::Expspace(p) => {
            let b = expspace_guess(*p)
                .ok_or_else(|| WitnessError::InfeasibleParams("guess exceeds 64 bits".into()))?;
            Canonical::new()
                .repeat(GUESS, [b as u64])
                .repeat(MAIN, [1u64 << p.n])
        }
        Spec::Tower(p) => {
            let (c0, amp) = tower_guesses(*p)?;
            Canonical::new()
                .repeat(TOWER_GUESS, [c0 as u64])
                .repeat(AMP_GUESS, amp.into_iter().map(|c| c as u64))
                .while_positive(AMP_MAIN, 0)
        }
        Spec::SubsetSum(inst) => {
            let n = inst.values.len();
            if n >= 32 {
                return Err(WitnessError::InfeasibleParams("too many values to search".into()));
            }
            let mask = (0u64..1 << n)
                .find(|m| {
                    (0..n)
                        .filter(|i| m >> i & 1 == 1)
                        .map(|i| inst.values[i])
                        .sum::<u64>()
                        == inst.target
                })
                .ok_or_else(|| {
                    WitnessError::InfeasibleParams("no subset reaches the target".into())
                })?;
            Canonical::new().choose((0..n).map(|i| mask >> i & 1 == 1))
        }
    })
}

/// A run of a named construction together with the configuration it ends in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessCertificate {
    pub construction: String,
    pub params: Vec<(String, String)>,
    pub run: Run,
    pub endpoint: Configuration,
}

impl WitnessCertificate {
    pub fn render(&self, vass: &Vass) -> String {
        let mut m = Manifest::new();
        m.push("construction", &self.construction);
        for (k, v) in &self.params {
            m.push(format!("param.{k}"), v);
        }
        m.push("endpoint", vass.show(&self.endpoint))
            .push("length", self.run.len());
        let mut out = m.render();
        out.push_str(&write_run(vass, &self.run));
        out
    }

    /// Reads a certificate and rebuilds the construction it refers to.
    pub fn parse(text: &str) -> Result<(Construction, WitnessCertificate), WitnessError> {
        let m = Manifest::parse(text);
        let id = m
            .get("construction")
            .ok_or_else(|| WitnessError::Certificate("missing construction".into()))?;
        let params: Vec<(String, String)> = m
            .entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("param.").map(|k| (k.to_string(), v.clone())))
            .collect();
        let cons = Spec::from_params(id, &params)?.build()?;
        let endpoint = m
            .get("endpoint")
            .ok_or_else(|| WitnessError::Certificate("missing endpoint".into()))?;
        let endpoint = parse_config(&cons.vass, endpoint).map_err(WitnessError::Certificate)?;
        let run = parse_run(&cons.vass, text).map_err(|e| WitnessError::Certificate(e.to_string()))?;
        let cert = WitnessCertificate {
            construction: id.to_string(),
            params,
            run,
            endpoint,
        };
        Ok((cons, cert))
    }

    /// Replays the run and checks the start, the asserted endpoint and the
    /// construction's contract.
    pub fn check(&self, cons: &Construction) -> Result<(), WitnessError> {
        if !cons.source.matches(&self.run.start) {
            return Err(WitnessError::ContractViolated(format!(
                "start {}",
                cons.vass.show(&self.run.start)
            )));
        }
        let (end, _) = cons.vass.validate_run(&self.run)?;
        if end != self.endpoint {
            return Err(WitnessError::Certificate(format!(
                "run ends at {} but the certificate asserts {}",
                cons.vass.show(&end),
                cons.vass.show(&self.endpoint)
            )));
        }
        if !cons.target.matches(&end) {
            return Err(WitnessError::ContractViolated(cons.vass.show(&end)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub construction: Construction,
    pub certificate: WitnessCertificate,
    pub iterations: BTreeMap<String, Vec<u64>>,
}

/// Drives `cons` from its source with `policy` and checks the contract.
pub fn witness_with(cons: Construction, policy: &mut dyn Policy) -> Result<Witness, WitnessError> {
    if cons.core.is_none() {
        return Err(WitnessError::NoProgram(cons.id.into()));
    }
    let start = cons
        .source
        .config()
        .ok_or_else(|| WitnessError::InfeasibleParams("source is not a single configuration".into()))?;
    let driven = drive(&cons.vass, &cons.frags, start, policy)?;
    if !cons.target.matches(&driven.end) {
        return Err(WitnessError::ContractViolated(cons.vass.show(&driven.end)));
    }
    let certificate = WitnessCertificate {
        construction: cons.id.to_string(),
        params: cons.params.clone(),
        run: driven.run,
        endpoint: driven.end,
    };
    Ok(Witness {
        construction: cons,
        certificate,
        iterations: driven.iterations,
    })
}

/// The intended run of a construction: every flush full, every guess the
/// honest one, every test passed at zero.
pub fn canonical_witness(spec: &Spec) -> Result<Witness, WitnessError> {
    let mut policy = canonical_policy(spec)?;
    witness_with(spec.build()?, &mut policy)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    Delete(usize),
    Truncate(usize),
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::Delete(i) => write!(f, "delete step {}", i + 1),
            Mutation::Truncate(n) => write!(f, "truncate to {n} steps"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MutationReport {
    pub tried: usize,
    /// Mutants that no longer replay.
    pub rejected: usize,
    /// Mutants that replay but miss the contract.
    pub off_contract: usize,
    /// Mutants that still satisfy the contract.
    pub survivors: Vec<Mutation>,
}

impl MutationReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mutants={}", self.tried);
        let _ = writeln!(out, "rejected={}", self.rejected);
        let _ = writeln!(out, "off_contract={}", self.off_contract);
        let _ = writeln!(out, "survivors={}", self.survivors.len());
        for s in &self.survivors {
            let _ = writeln!(out, "survivor {s}");
        }
        out
    }
}

/// Applies `mutations` random single-step deletions or truncations to the
/// certificate's run and replays each mutant against the contract.
pub fn mutate_and_check(
    cert: &WitnessCertificate,
    cons: &Construction,
    mutations: usize,
    seed: u64,
) -> MutationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MutationReport::default();
    let len = cert.run.len();
    if len == 0 {
        return report;
    }
    for _ in 0..mutations {
        let m = if rng.gen_bool(0.5) {
            Mutation::Delete(rng.gen_range(0..len))
        } else {
            Mutation::Truncate(rng.gen_range(0..len))
        };
        let mut steps = cert.run.steps.clone();
        match m {
            Mutation::Delete(i) => {
                steps.remove(i);
            }
            Mutation::Truncate(n) => steps.truncate(n),
        }
        let mutant = Run {
            start: cert.run.start.clone(),
            steps,
        };
        report.tried += 1;
        match cons.vass.validate_run(&mutant) {
            Err(_) => report.rejected += 1,
            Ok((end, _)) if cons.target.matches(&end) => report.survivors.push(m),
            Ok(_) => report.off_contract += 1,
        }
    }
    report
}
