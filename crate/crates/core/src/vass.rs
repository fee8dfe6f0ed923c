//! Vector addition systems with states and bounded counter automata.
//!
//! A [`Vass`] owns its state names and a list of integer-vector transitions.
//! States are addressed by dense [`StateId`]s internally; the names are only
//! used for I/O. Configurations carry nonnegative counters, transition effects
//! may be negative.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Deref, DerefMut};

use petgraph::graph::DiGraph;
use thiserror::Error;

pub type StateId = usize;

/// Integer vector of fixed dimension.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CounterVector(pub Vec<i64>);

impl CounterVector {
    pub fn zeros(dimension: usize) -> Self {
        CounterVector(vec![0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0)
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    /// Componentwise sum; `None` on overflow.
    pub fn checked_add(&self, other: &CounterVector) -> Option<CounterVector> {
        debug_assert_eq!(self.dimension(), other.dimension());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_add(*b))
            .collect::<Option<Vec<_>>>()
            .map(CounterVector)
    }

    /// Extends the vector with zeros up to `dimension`.
    pub fn padded(&self, dimension: usize) -> CounterVector {
        let mut v = self.0.clone();
        v.resize(dimension.max(v.len()), 0);
        CounterVector(v)
    }
}

impl Deref for CounterVector {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl DerefMut for CounterVector {
    fn deref_mut(&mut self) -> &mut [i64] {
        &mut self.0
    }
}

impl From<Vec<i64>> for CounterVector {
    fn from(v: Vec<i64>) -> Self {
        CounterVector(v)
    }
}

impl fmt::Display for CounterVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: StateId,
    pub effect: CounterVector,
    pub to: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub state: StateId,
    pub counters: CounterVector,
}

impl Configuration {
    pub fn new(state: StateId, counters: impl Into<CounterVector>) -> Self {
        Configuration {
            state,
            counters: counters.into(),
        }
    }
}

/// A start configuration plus transition indices in firing order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub start: Configuration,
    pub steps: Vec<usize>,
}

impl Run {
    pub fn empty(start: Configuration) -> Self {
        Run {
            start,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    Unary,
    Binary,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VassError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state id {0} out of range")]
    BadStateId(StateId),
    #[error("vector of dimension {found} where {expected} was expected")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero-tested counter {counter} outside dimension {dimension}")]
    ZeroTestOutOfRange { counter: usize, dimension: usize },
    #[error("missing distinguished {0} state")]
    MissingDistinguished(&'static str),
    #[error("configuration has a negative counter")]
    NegativeConfiguration,
}

/// Why a single transition could not be fired.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FireError {
    #[error("transition leaves `{expected}` but the run is in `{found}`")]
    WrongState { expected: String, found: String },
    #[error("counter {counter} would become negative")]
    NegativeCounter { counter: usize },
    #[error("zero-test on counter {counter} with value {value}")]
    ZeroTestFailed { counter: usize, value: i64 },
    #[error("counter sum {sum} is not below the bound {bound}")]
    BoundExceeded { sum: i64, bound: i64 },
    #[error("no transition with index {0}")]
    UnknownTransition(usize),
    #[error("arithmetic overflow")]
    Overflow,
    #[error("invalid start configuration: {0}")]
    InvalidStart(String),
}

/// Failure while replaying a run; `step` is 1-based, 0 means the start
/// configuration itself was rejected.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("step {step}: {cause}")]
pub struct RunError {
    pub step: usize,
    pub cause: FireError,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vass {
    name: String,
    dimension: usize,
    states: Vec<String>,
    index: HashMap<String, StateId>,
    transitions: Vec<Transition>,
    initial: Option<StateId>,
    final_state: Option<StateId>,
}

impl Vass {
    pub fn new(name: impl Into<String>, dimension: usize) -> Result<Self, VassError> {
        if dimension == 0 {
            return Err(VassError::ZeroDimension);
        }
        Ok(Vass {
            name: name.into(),
            dimension,
            states: Vec::new(),
            index: HashMap::new(),
            transitions: Vec::new(),
            initial: None,
            final_state: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, t: usize) -> Option<&Transition> {
        self.transitions.get(t)
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.states[id]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> Result<StateId, VassError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(VassError::DuplicateState(name));
        }
        let id = self.states.len();
        self.index.insert(name.clone(), id);
        self.states.push(name);
        Ok(id)
    }

    /// Returns the id of `name`, declaring it if needed.
    pub fn ensure_state(&mut self, name: &str) -> StateId {
        match self.index.get(name) {
            Some(&id) => id,
            None => self.add_state(name).expect("name checked absent"),
        }
    }

    pub fn add_transition(
        &mut self,
        from: StateId,
        effect: impl Into<CounterVector>,
        to: StateId,
    ) -> Result<usize, VassError> {
        let effect = effect.into();
        if effect.dimension() != self.dimension {
            return Err(VassError::DimensionMismatch {
                expected: self.dimension,
                found: effect.dimension(),
            });
        }
        for s in [from, to] {
            if s >= self.states.len() {
                return Err(VassError::BadStateId(s));
            }
        }
        self.transitions.push(Transition { from, effect, to });
        Ok(self.transitions.len() - 1)
    }

    pub fn initial(&self) -> Option<StateId> {
        self.initial
    }

    pub fn final_state(&self) -> Option<StateId> {
        self.final_state
    }

    pub fn set_initial(&mut self, s: StateId) {
        assert!(s < self.states.len(), "state id out of range");
        self.initial = Some(s);
    }

    pub fn set_final(&mut self, s: StateId) {
        assert!(s < self.states.len(), "state id out of range");
        self.final_state = Some(s);
    }

    /// Both distinguished states, or an error naming the missing one.
    pub fn distinguished(&self) -> Result<(StateId, StateId), VassError> {
        let i = self.initial.ok_or(VassError::MissingDistinguished("initial"))?;
        let f = self
            .final_state
            .ok_or(VassError::MissingDistinguished("final"))?;
        Ok((i, f))
    }

    pub fn config(&self, state: &str, counters: &[i64]) -> Result<Configuration, VassError> {
        let id = self
            .state_id(state)
            .ok_or_else(|| VassError::UnknownState(state.to_string()))?;
        self.check_config(&Configuration::new(id, counters.to_vec()))?;
        Ok(Configuration::new(id, counters.to_vec()))
    }

    pub fn check_config(&self, c: &Configuration) -> Result<(), VassError> {
        if c.state >= self.states.len() {
            return Err(VassError::BadStateId(c.state));
        }
        if c.counters.dimension() != self.dimension {
            return Err(VassError::DimensionMismatch {
                expected: self.dimension,
                found: c.counters.dimension(),
            });
        }
        if !c.counters.is_nonnegative() {
            return Err(VassError::NegativeConfiguration);
        }
        Ok(())
    }

    /// `q(1,2)` rendering of a configuration.
    pub fn show(&self, c: &Configuration) -> String {
        format!("{}{}", self.state_name(c.state), c.counters)
    }

    pub fn fire(&self, config: &Configuration, t: usize) -> Result<Configuration, FireError> {
        let mut next = config.clone();
        self.fire_in_place(&mut next.state, &mut next.counters, t)?;
        Ok(next)
    }

    /// Fires `t` on a mutable configuration. On error nothing is modified.
    pub fn fire_in_place(
        &self,
        state: &mut StateId,
        counters: &mut [i64],
        t: usize,
    ) -> Result<(), FireError> {
        let tr = self
            .transitions
            .get(t)
            .ok_or(FireError::UnknownTransition(t))?;
        if tr.from != *state {
            return Err(FireError::WrongState {
                expected: self.states[tr.from].clone(),
                found: self.states[*state].clone(),
            });
        }
        for (i, (&v, &e)) in counters.iter().zip(tr.effect.iter()).enumerate() {
            match v.checked_add(e) {
                Some(r) if r < 0 => return Err(FireError::NegativeCounter { counter: i }),
                None => return Err(FireError::Overflow),
                _ => {}
            }
        }
        for (v, e) in counters.iter_mut().zip(tr.effect.iter()) {
            *v += e;
        }
        *state = tr.to;
        Ok(())
    }

    /// Replays `run`, returning the final configuration and the total effect.
    pub fn validate_run(&self, run: &Run) -> Result<(Configuration, CounterVector), RunError> {
        self.check_config(&run.start).map_err(|e| RunError {
            step: 0,
            cause: FireError::InvalidStart(e.to_string()),
        })?;
        let mut state = run.start.state;
        let mut counters = run.start.counters.clone();
        let mut effect = CounterVector::zeros(self.dimension);
        for (i, &t) in run.steps.iter().enumerate() {
            let step = i + 1;
            self.fire_in_place(&mut state, &mut counters, t)
                .map_err(|cause| RunError { step, cause })?;
            let e = &self.transitions[t].effect;
            effect = effect.checked_add(e).ok_or(RunError {
                step,
                cause: FireError::Overflow,
            })?;
        }
        Ok((Configuration { state, counters }, effect))
    }

    /// True iff every state lies on at most one state-cycle.
    ///
    /// Cycles are counted over transitions, so two parallel edges form two
    /// cycles. A strongly connected component is a single simple cycle exactly
    /// when it has as many internal transitions as states; any extra ear
    /// creates a second cycle through its attachment point.
    pub fn is_flat(&self) -> bool {
        let mut graph = DiGraph::<(), ()>::with_capacity(self.states.len(), self.transitions.len());
        let nodes: Vec<_> = (0..self.states.len()).map(|_| graph.add_node(())).collect();
        for t in &self.transitions {
            graph.add_edge(nodes[t.from], nodes[t.to], ());
        }
        let mut component = vec![0usize; self.states.len()];
        let sccs = petgraph::algo::tarjan_scc(&graph);
        for (ci, scc) in sccs.iter().enumerate() {
            for n in scc {
                component[n.index()] = ci;
            }
        }
        let mut internal = vec![0usize; sccs.len()];
        for t in &self.transitions {
            if component[t.from] == component[t.to] {
                internal[component[t.from]] += 1;
            }
        }
        sccs.iter()
            .zip(&internal)
            .all(|(scc, &edges)| edges == 0 || edges == scc.len())
    }

    /// Size measure: one unit per state and per transition endpoint, plus
    /// `1 + |v|` (unary) or `1 + bitlen(|v|)` (binary) per effect entry.
    pub fn encoded_size(&self, kind: EncodingKind) -> u64 {
        let entry = |v: i64| -> u64 {
            let m = v.unsigned_abs();
            match kind {
                EncodingKind::Unary => 1 + m,
                EncodingKind::Binary => 1 + u64::from(64 - m.leading_zeros()),
            }
        };
        let mut size = self.states.len() as u64;
        for t in &self.transitions {
            size += 2;
            size += t.effect.iter().map(|&v| entry(v)).sum::<u64>();
        }
        size
    }

    /// Largest absolute transition entry.
    pub fn max_abs_entry(&self) -> u64 {
        self.transitions
            .iter()
            .flat_map(|t| t.effect.iter())
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Copy with every effect zero-padded to `dimension`.
    pub fn padded(&self, dimension: usize) -> Vass {
        let mut out = self.clone();
        out.dimension = dimension.max(self.dimension);
        for t in &mut out.transitions {
            t.effect = t.effect.padded(out.dimension);
        }
        out
    }

    /// Reverse-direction adjacency: outgoing transition indices per state, in
    /// declaration order.
    pub fn outgoing(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for (i, t) in self.transitions.iter().enumerate() {
            out[t.from].push(i);
        }
        out
    }
}

/// A VASS whose transitions may additionally demand one counter be zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterAutomaton {
    system: Vass,
    zero_tests: Vec<Option<usize>>,
}

impl CounterAutomaton {
    pub fn new(name: impl Into<String>, dimension: usize) -> Result<Self, VassError> {
        Ok(CounterAutomaton {
            system: Vass::new(name, dimension)?,
            zero_tests: Vec::new(),
        })
    }

    pub fn system(&self) -> &Vass {
        &self.system
    }

    pub fn dimension(&self) -> usize {
        self.system.dimension()
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> Result<StateId, VassError> {
        self.system.add_state(name)
    }

    pub fn ensure_state(&mut self, name: &str) -> StateId {
        self.system.ensure_state(name)
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.system.set_initial(s)
    }

    pub fn set_accepting(&mut self, s: StateId) {
        self.system.set_final(s)
    }

    pub fn initial(&self) -> Option<StateId> {
        self.system.initial()
    }

    pub fn accepting(&self) -> Option<StateId> {
        self.system.final_state()
    }

    pub fn add_update(
        &mut self,
        from: StateId,
        effect: impl Into<CounterVector>,
        to: StateId,
    ) -> Result<usize, VassError> {
        let t = self.system.add_transition(from, effect, to)?;
        self.zero_tests.push(None);
        Ok(t)
    }

    /// Adds a transition that fires only when counter `counter` (0-based) is 0.
    pub fn add_zero_test(
        &mut self,
        from: StateId,
        effect: impl Into<CounterVector>,
        counter: usize,
        to: StateId,
    ) -> Result<usize, VassError> {
        if counter >= self.dimension() {
            return Err(VassError::ZeroTestOutOfRange {
                counter,
                dimension: self.dimension(),
            });
        }
        let t = self.system.add_transition(from, effect, to)?;
        self.zero_tests.push(Some(counter));
        Ok(t)
    }

    pub fn zero_test(&self, t: usize) -> Option<usize> {
        self.zero_tests.get(t).copied().flatten()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (&Transition, Option<usize>)> {
        self.system
            .transitions()
            .iter()
            .zip(self.zero_tests.iter().copied())
    }

    pub fn fire_in_place(
        &self,
        state: &mut StateId,
        counters: &mut [i64],
        t: usize,
    ) -> Result<(), FireError> {
        if let Some(k) = self.zero_test(t) {
            let tr = self
                .system
                .transition(t)
                .ok_or(FireError::UnknownTransition(t))?;
            if tr.from == *state && counters[k] != 0 {
                return Err(FireError::ZeroTestFailed {
                    counter: k,
                    value: counters[k],
                });
            }
        }
        self.system.fire_in_place(state, counters, t)
    }

    /// Replays `run` enforcing nonnegativity, zero-test guards and the strict
    /// bound `sum(counters) < bound` at every configuration.
    pub fn validate_run(&self, run: &Run, bound: i64) -> Result<Configuration, RunError> {
        let check_bound = |counters: &[i64], step: usize| {
            let sum: i64 = counters.iter().sum();
            if sum >= bound {
                Err(RunError {
                    step,
                    cause: FireError::BoundExceeded { sum, bound },
                })
            } else {
                Ok(())
            }
        };
        self.system.check_config(&run.start).map_err(|e| RunError {
            step: 0,
            cause: FireError::InvalidStart(e.to_string()),
        })?;
        let mut state = run.start.state;
        let mut counters = run.start.counters.clone();
        check_bound(&counters, 0)?;
        for (i, &t) in run.steps.iter().enumerate() {
            self.fire_in_place(&mut state, &mut counters, t)
                .map_err(|cause| RunError { step: i + 1, cause })?;
            check_bound(&counters, i + 1)?;
        }
        Ok(Configuration { state, counters })
    }

    /// Number of zero-test transitions among `steps`.
    pub fn count_tests(&self, steps: &[usize]) -> usize {
        steps.iter().filter(|&&t| self.zero_test(t).is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> (Vass, StateId, StateId) {
        let mut v = Vass::new("t", 2).unwrap();
        let q = v.add_state("q").unwrap();
        let p = v.add_state("p").unwrap();
        (v, q, p)
    }

    #[test]
    fn fire_moves_one_unit() {
        let (mut v, q, p) = two_state();
        let t = v.add_transition(q, vec![-1, 1], p).unwrap();
        let next = v.fire(&Configuration::new(q, vec![2, 0]), t).unwrap();
        assert_eq!(next, Configuration::new(p, vec![1, 1]));
    }

    #[test]
    fn fire_guards_at_zero() {
        let (mut v, q, p) = two_state();
        let t = v.add_transition(q, vec![-1, 0], p).unwrap();
        assert_eq!(
            v.fire(&Configuration::new(q, vec![0, 0]), t),
            Err(FireError::NegativeCounter { counter: 0 })
        );
    }

    #[test]
    fn fire_rejects_wrong_state() {
        let (mut v, q, p) = two_state();
        let t = v.add_transition(q, vec![0, 0], p).unwrap();
        assert!(matches!(
            v.fire(&Configuration::new(p, vec![0, 0]), t),
            Err(FireError::WrongState { .. })
        ));
    }

    #[test]
    fn empty_run_is_identity() {
        let (v, q, _) = two_state();
        let start = Configuration::new(q, vec![3, 1]);
        let (end, eff) = v.validate_run(&Run::empty(start.clone())).unwrap();
        assert_eq!(end, start);
        assert_eq!(eff, CounterVector(vec![0, 0]));
    }

    #[test]
    fn run_error_reports_one_based_step() {
        let (mut v, q, p) = two_state();
        let a = v.add_transition(q, vec![1, 0], p).unwrap();
        let b = v.add_transition(q, vec![1, 0], p).unwrap();
        let run = Run {
            start: Configuration::new(q, vec![0, 0]),
            steps: vec![a, b],
        };
        let err = v.validate_run(&run).unwrap_err();
        assert_eq!(err.step, 2);
        assert!(matches!(err.cause, FireError::WrongState { .. }));
    }

    #[test]
    fn two_self_loops_are_not_flat() {
        let mut v = Vass::new("t", 1).unwrap();
        let q = v.add_state("q").unwrap();
        v.add_transition(q, vec![1], q).unwrap();
        assert!(v.is_flat());
        v.add_transition(q, vec![2], q).unwrap();
        assert!(!v.is_flat());
    }

    #[test]
    fn size_accounting() {
        let mut v = Vass::new("t", 1).unwrap();
        let q = v.add_state("q").unwrap();
        assert_eq!(v.encoded_size(EncodingKind::Unary), 1);
        v.add_transition(q, vec![3], q).unwrap();
        // 1 state + 2 endpoints + (1+3)
        assert_eq!(v.encoded_size(EncodingKind::Unary), 1 + 2 + 4);
        // bitlen(3) = 2
        assert_eq!(v.encoded_size(EncodingKind::Binary), 1 + 2 + 3);
    }

    #[test]
    fn automaton_guards_and_bound() {
        let mut a = CounterAutomaton::new("a", 2).unwrap();
        let s = a.add_state("s").unwrap();
        a.set_initial(s);
        a.set_accepting(s);
        let inc = a.add_update(s, vec![1, 0], s).unwrap();
        let zt = a.add_zero_test(s, vec![0, 0], 0, s).unwrap();
        let start = Configuration::new(s, vec![0, 0]);

        assert_eq!(
            a.validate_run(&Run::empty(start.clone()), 1).unwrap(),
            start
        );

        let run = Run {
            start: start.clone(),
            steps: vec![inc, inc, zt],
        };
        let err = a.validate_run(&run, 10).unwrap_err();
        assert_eq!(err.step, 3);
        assert_eq!(
            err.cause,
            FireError::ZeroTestFailed {
                counter: 0,
                value: 2
            }
        );

        let run = Run {
            start,
            steps: vec![inc, inc],
        };
        let err = a.validate_run(&run, 2).unwrap_err();
        assert_eq!(err.cause, FireError::BoundExceeded { sum: 2, bound: 2 });
    }

    #[test]
    fn zero_test_index_checked() {
        let mut a = CounterAutomaton::new("a", 1).unwrap();
        let s = a.add_state("s").unwrap();
        assert!(a.add_zero_test(s, vec![0], 1, s).is_err());
    }
}
