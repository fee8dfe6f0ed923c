//! Generators for the hardness constructions and the counter-automaton
//! translations. Each generator emits a counter program, eliminates its
//! markers with [`crate::gadgets`] and compiles it; the result carries the
//! endpoint contract the construction is supposed to satisfy.

use std::fmt;

use thiserror::Error;

use crate::gadgets::{
    amplifier_stmts, amplifier_triple, emit_multiply,
    expand_triple_tests, instrument_ctrl, pair_epilogue, pair_test_body, triple_test_body,
    with_complement, with_strategy, CtrlSpec, GadgetError,
};
use crate::lang::{
    compile, compile_into, env, expand, CoreProgram, CoreStmt, Expr, Frag, LangError, PairSpec,
    Program, Stmt, Strategy, TripleSpec, UpdateTerm,
};
use crate::text::Manifest;
use crate::vass::{Configuration, CounterAutomaton, EncodingKind, StateId, Vass, VassError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Vass(#[from] VassError),
}

/// One coordinate of an endpoint contract.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bound {
    Exact(i64),
    Free,
    /// `factor` times the final value of counter `of`.
    Multiple { factor: i64, of: usize },
    /// A value outside the 64-bit range, kept as text; matches nothing.
    Beyond(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub state: StateId,
    pub bounds: Vec<Bound>,
}

impl Endpoint {
    pub fn exact(state: StateId, values: &[i64]) -> Self {
        Endpoint {
            state,
            bounds: values.iter().map(|&v| Bound::Exact(v)).collect(),
        }
    }

    pub fn matches(&self, c: &Configuration) -> bool {
        c.state == self.state
            && c.counters.len() == self.bounds.len()
            && self.bounds.iter().zip(c.counters.iter()).all(|(b, &v)| match b {
                Bound::Exact(e) => *e == v,
                Bound::Free => true,
                Bound::Multiple { factor, of } => {
                    factor.checked_mul(c.counters[*of]) == Some(v)
                }
                Bound::Beyond(_) => false,
            })
    }

    /// The configuration, when every coordinate is exact.
    pub fn config(&self) -> Option<Configuration> {
        let mut v = Vec::with_capacity(self.bounds.len());
        for b in &self.bounds {
            match b {
                Bound::Exact(e) => v.push(*e),
                _ => return None,
            }
        }
        Some(Configuration::new(self.state, v))
    }

    pub fn render(&self, vass: &Vass) -> String {
        let parts: Vec<String> = self
            .bounds
            .iter()
            .map(|b| match b {
                Bound::Exact(v) => v.to_string(),
                Bound::Free => "_".into(),
                Bound::Multiple { factor, of } => format!("{factor}*x{}", of + 1),
                Bound::Beyond(s) => s.clone(),
            })
            .collect();
        format!("{}({})", vass.state_name(self.state), parts.join(","))
    }
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub id: &'static str,
    pub params: Vec<(String, String)>,
    pub encoding: EncodingKind,
    /// Surface program with markers, when the construction has one.
    pub program: Option<Program>,
    /// Marker-free ground program that was compiled.
    pub core: Option<CoreProgram>,
    pub frags: Vec<Frag>,
    pub vass: Vass,
    pub source: Endpoint,
    pub target: Endpoint,
}

impl Construction {
    pub fn manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.push("construction", self.id);
        for (k, v) in &self.params {
            m.push(format!("param.{k}"), v);
        }
        m.push(
            "encoding",
            match self.encoding {
                EncodingKind::Unary => "unary",
                EncodingKind::Binary => "binary",
            },
        );
        m.push("dimension", self.vass.dimension())
            .push("states", self.vass.states().len())
            .push("transitions", self.vass.transitions().len())
            .push("flat", self.vass.is_flat())
            .push("size", self.vass.encoded_size(self.encoding));
        if let Ok((i, f)) = self.vass.distinguished() {
            m.push("initial", self.vass.state_name(i))
                .push("final", self.vass.state_name(f));
        }
        m.push("source", self.source.render(&self.vass))
            .push("target", self.target.render(&self.vass));
        m
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} states, {} transitions)",
            self.id,
            self.vass.states().len(),
            self.vass.transitions().len()
        )
    }
}

fn counters(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn finish(
    id: &'static str,
    params: Vec<(String, String)>,
    encoding: EncodingKind,
    program: Program,
    core: CoreProgram,
    source: Vec<i64>,
    target: Vec<Bound>,
) -> Result<Construction, ReductionError> {
    let compiled = compile(&core)?;
    Ok(Construction {
        id,
        params,
        encoding,
        program: Some(program),
        core: Some(core),
        frags: compiled.frags,
        source: Endpoint::exact(compiled.entry, &source),
        target: Endpoint {
            state: compiled.exit,
            bounds: target,
        },
        vass: compiled.vass,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSumInstance {
    pub target: u64,
    pub values: Vec<u64>,
}

impl SubsetSumInstance {
    pub fn new(target: u64, values: &[u64]) -> Self {
        SubsetSumInstance {
            target,
            values: values.to_vec(),
        }
    }

    /// Bit width used by the encoding: enough bits for every number, and
    /// at least 2.
    pub fn width(&self) -> u32 {
        let top = self.values.iter().copied().chain([self.target]).max().unwrap_or(0);
        (u64::BITS - top.leading_zeros()).max(2)
    }
}

/// One generator block: Horner doubling of `value` into x, then moved into z
/// with the given sign.
pub fn subset_sum_block(value: u64, k: u32, sign: i64) -> Vec<Stmt> {
    let bit = |j: u32| ((value >> j) & 1) as i64;
    let test = |x: &str| Stmt::zero_test(x, Some(Strategy::Ctrl("c".into())));
    let mut out = vec![Stmt::Update(vec![UpdateTerm::add("x", bit(k - 1))])];
    for j in (0..k - 1).rev() {
        out.push(Stmt::looped(vec![Stmt::Update(vec![
            UpdateTerm::sub("x", 1),
            UpdateTerm::add("y", 1),
        ])]));
        out.push(test("x"));
        out.push(Stmt::looped(vec![Stmt::Update(vec![
            UpdateTerm::add("x", 2),
            UpdateTerm::sub("y", 1),
        ])]));
        out.push(test("y"));
        out.push(Stmt::Update(vec![UpdateTerm::add("x", bit(j))]));
    }
    let mut last = vec![UpdateTerm::sub("x", 1)];
    match sign {
        1 => last.push(UpdateTerm::add("z", 1)),
        -1 => last.push(UpdateTerm::sub("z", 1)),
        _ => {}
    }
    out.push(Stmt::looped(vec![Stmt::Update(last)]));
    out.push(test("x"));
    out
}

pub fn subset_sum_program(inst: &SubsetSumInstance) -> Program {
    let k = inst.width();
    let mut body = subset_sum_block(inst.target, k, 1);
    for &v in &inst.values {
        body.push(Stmt::Choice {
            label: Some("take".into()),
            left: subset_sum_block(v, k, -1),
            right: subset_sum_block(v, k, 0),
        });
    }
    Program {
        name: "subsetsum".into(),
        params: vec![],
        counters: counters(&["x", "y", "z", "c"]),
        body,
    }
}

/// Flat unary 4-VASS where 0^4 reaches 0^4 iff some subset of the values
/// sums to the target.
pub fn subset_sum_to_vass(inst: &SubsetSumInstance) -> Result<Construction, ReductionError> {
    let program = subset_sum_program(inst);
    let core = expand(&program, &env(&[]))?;
    let core = instrument_ctrl(&core, &CtrlSpec::new("c", &["x", "y"]))?;
    let values: Vec<String> = inst.values.iter().map(u64::to_string).collect();
    finish(
        "subset-sum",
        vec![
            ("target".into(), inst.target.to_string()),
            ("values".into(), values.join(",")),
            ("k".into(), inst.width().to_string()),
        ],
        EncodingKind::Unary,
        program,
        core,
        vec![0; 4],
        vec![Bound::Exact(0); 4],
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PumpParams {
    pub s: u32,
    pub n: u32,
}

impl PumpParams {
    pub fn new(s: u32, n: u32) -> Self {
        PumpParams { s, n }
    }

    fn check(&self) -> Result<(), ReductionError> {
        if self.s == 0 || self.n == 0 {
            return Err(ReductionError::InvalidParams("s and n must be at least 1".into()));
        }
        Ok(())
    }
}

fn multiply_via(x: &str, y: &str, c: i64, st: &Strategy) -> Vec<Stmt> {
    with_strategy(emit_multiply(x, y, c).expect("distinct counters"), st)
}

pub fn pspace_program() -> Program {
    let ctrl = Strategy::Ctrl("x5".into());
    let mut body = multiply_via("x1", "x3", 2, &ctrl);
    body.extend(multiply_via("x2", "x3", 4, &ctrl));
    let s = || Expr::var("s");
    Program {
        name: "pspace".into(),
        params: vec!["s".into(), "n".into()],
        counters: numbered("x", 5),
        body: vec![
            Stmt::Update(vec![
                UpdateTerm::add("x1", Expr::mul(Expr::Int(4), s())),
                UpdateTerm::add("x2", Expr::mul(Expr::mul(Expr::Int(16), s()), s())),
            ]),
            Stmt::For {
                var: "i".into(),
                lo: Expr::Int(1),
                hi: Expr::var("n"),
                descending: false,
                body,
            },
        ],
    }
}

fn overflow(what: &str) -> ReductionError {
    ReductionError::Overflow(what.into())
}

/// 5-VASS whose runs from 0^5 to a final configuration with x5 = 0 end at
/// (4s 2^n, 16s^2 4^n, 0, 0, 0).
pub fn pspace_pump(p: PumpParams) -> Result<Construction, ReductionError> {
    p.check()?;
    let program = pspace_program();
    let core = expand(&program, &env(&[("s", p.s as i64), ("n", p.n as i64)]))?;
    let core = instrument_ctrl(&core, &CtrlSpec::new("x5", &["x1", "x2", "x3"]))?;
    let s = p.s as i64;
    let x1 = 2i64
        .checked_pow(p.n)
        .and_then(|v| v.checked_mul(4 * s))
        .ok_or_else(|| overflow("4s*2^n"))?;
    let x2 = 4i64
        .checked_pow(p.n)
        .and_then(|v| v.checked_mul(16 * s * s))
        .ok_or_else(|| overflow("16s^2*4^n"))?;
    finish(
        "pspace",
        vec![("s".into(), p.s.to_string()), ("n".into(), p.n.to_string())],
        EncodingKind::Unary,
        program,
        core,
        vec![0; 5],
        [x1, x2, 0, 0, 0].iter().map(|&v| Bound::Exact(v)).collect(),
    )
}

/// Pads both systems to `pad` counters and links `v1`'s final state to
/// `v2`'s initial state with a zero transition.
pub fn sequential_compose(v1: &Vass, v2: &Vass, pad: usize) -> Result<Vass, ReductionError> {
    let (i1, f1) = v1.distinguished()?;
    let (i2, f2) = v2.distinguished()?;
    if v1.dimension() > pad || v2.dimension() > pad {
        return Err(ReductionError::InvalidParams(format!(
            "pad {pad} is below dimension {}",
            v1.dimension().max(v2.dimension())
        )));
    }
    let mut out = Vass::new(format!("{}+{}", v1.name(), v2.name()), pad)?;
    let mut copy = |v: &Vass, tag: &str| -> Result<usize, ReductionError> {
        let base = out.states().len();
        for s in v.states() {
            out.add_state(format!("{tag}.{s}"))?;
        }
        for t in v.transitions() {
            out.add_transition(base + t.from, t.effect.padded(pad), base + t.to)?;
        }
        Ok(base)
    };
    let b1 = copy(v1, "1")?;
    let b2 = copy(v2, "2")?;
    out.add_transition(b1 + f1, vec![0; pad], b2 + i2)?;
    out.set_initial(b1 + i1);
    out.set_final(b2 + f2);
    Ok(out)
}

pub const GUESS: &str = "guess";
pub const MAIN: &str = "main";

pub fn expspace_triple() -> TripleSpec {
    TripleSpec::new("x4", "x5", "x6", &["x1", "x2", "x3"])
}

/// Program for the 6-VASS; `m` stands for 2^n.
pub fn expspace_program() -> Program {
    let triple = Strategy::Triple(expspace_triple());
    let family = ["x1", "x2", "x3"];
    let budget = || Expr::add(Expr::mul(Expr::Int(8), Expr::var("m")), Expr::Int(2));
    let s = || Expr::var("s");
    let mut main = multiply_via("x1", "x3", 4, &triple);
    main.extend(multiply_via("x2", "x3", 16, &triple));
    let body = vec![
        Stmt::Update(vec![UpdateTerm::add("x5", budget())]),
        Stmt::labelled_loop(
            GUESS,
            vec![Stmt::Update(vec![
                UpdateTerm::add("x4", 1),
                UpdateTerm::add("x6", budget()),
            ])],
        ),
        Stmt::Update(vec![
            UpdateTerm::add("x1", Expr::mul(Expr::Int(6), s())),
            UpdateTerm::add("x2", Expr::mul(Expr::mul(Expr::Int(36), s()), s())),
        ]),
        Stmt::labelled_loop(MAIN, main),
        Stmt::zero_test("x4", Some(triple)),
    ];
    Program {
        name: "expspace".into(),
        params: vec!["s".into(), "m".into()],
        counters: numbered("x", 6),
        body: with_complement(body, "x4", &family),
    }
}

/// Binary 6-VASS whose runs from 0^6 to a final configuration with x6 = 0
/// end at (6s 4^(2^n), 36s^2 16^(2^n), 0, 0, 0, 0).
pub fn expspace_pump(p: PumpParams) -> Result<Construction, ReductionError> {
    p.check()?;
    let m = 1i64
        .checked_shl(p.n)
        .filter(|&m| m > 0 && m <= (i64::MAX - 2) / 8)
        .ok_or_else(|| overflow("8*2^n+2"))?;
    let program = expspace_program();
    let core = expand(&program, &env(&[("s", p.s as i64), ("m", m)]))?;
    let core = expand_triple_tests(&core, &expspace_triple())?;
    let s = p.s as i64;
    let big = |base: u32, coeff: i64, text: String| -> Bound {
        u32::try_from(m)
            .ok()
            .and_then(|e| (base as i64).checked_pow(e))
            .and_then(|v| v.checked_mul(coeff))
            .map_or(Bound::Beyond(text), Bound::Exact)
    };
    let x1 = big(4, 6 * s, format!("{}*4^{m}", 6 * s));
    let x2 = big(16, 36 * s * s, format!("{}*16^{m}", 36 * s * s));
    let mut target = vec![x1, x2];
    target.extend([0, 0, 0, 0].map(Bound::Exact));
    finish(
        "expspace",
        vec![("s".into(), p.s.to_string()), ("n".into(), p.n.to_string())],
        EncodingKind::Binary,
        program,
        core,
        vec![0; 6],
        target,
    )
}

/// The honest guess for the bound counter: the final x1 + x2.
pub fn expspace_guess(p: PumpParams) -> Option<i64> {
    let m = u32::try_from(1u64.checked_shl(p.n)?).ok()?;
    let s = p.s as i64;
    let a = 4i64.checked_pow(m)?.checked_mul(6 * s)?;
    let b = 16i64.checked_pow(m)?.checked_mul(36 * s * s)?;
    a.checked_add(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TowerParams {
    pub n: u32,
    pub seed: u32,
}

impl TowerParams {
    pub fn new(n: u32, seed: u32) -> Self {
        TowerParams { n, seed }
    }

    fn check(&self) -> Result<(), ReductionError> {
        if self.n == 0 {
            return Err(ReductionError::InvalidParams("n must be at least 1".into()));
        }
        if self.seed != 1 && (self.seed < 8 || !self.seed.is_multiple_of(8)) {
            return Err(ReductionError::InvalidParams(
                "seed must be 1 or a positive multiple of 8".into(),
            ));
        }
        Ok(())
    }
}

impl Default for TowerParams {
    fn default() -> Self {
        TowerParams { n: 1, seed: 8 }
    }
}

pub const TOWER_GUESS: &str = "tower.guess";

/// `seed` after `n` rounds of `v -> 2^v`, if it fits in an i64.
pub fn tower_value(seed: u32, n: u32) -> Option<i64> {
    let mut v = seed as i64;
    for _ in 0..n {
        v = 1i64.checked_shl(u32::try_from(v).ok()?).filter(|&r| r > 0)?;
    }
    Some(v)
}

pub fn tower_program() -> Program {
    let x: Vec<String> = numbered("x", 8);
    let names: [&str; 7] = std::array::from_fn(|i| x[i].as_str());
    let ctrl = || Some(Strategy::Ctrl("x8".into()));
    let mut round = amplifier_stmts(names).expect("distinct counters");
    for c in &names[..4] {
        round.push(Stmt::zero_test(c, ctrl()));
    }
    for (from, to) in [("x5", "x1"), ("x6", "x2"), ("x7", "x3")] {
        round.push(Stmt::looped(vec![Stmt::Update(vec![
            UpdateTerm::sub(from, 1),
            UpdateTerm::add(to, 1),
        ])]));
    }
    for c in &names[4..] {
        round.push(Stmt::zero_test(c, ctrl()));
    }
    Program {
        name: "tower".into(),
        params: vec!["n".into(), "seed".into()],
        counters: x.clone(),
        body: vec![
            Stmt::Update(vec![UpdateTerm::add("x1", Expr::var("seed"))]),
            Stmt::labelled_loop(
                TOWER_GUESS,
                vec![Stmt::Update(vec![
                    UpdateTerm::add("x2", 1),
                    UpdateTerm::add("x3", Expr::var("seed")),
                ])],
            ),
            Stmt::For {
                var: "i".into(),
                lo: Expr::Int(1),
                hi: Expr::var("n"),
                descending: false,
                body: round,
            },
        ],
    }
}

/// 8-VASS building (t, C, tC) on (x1, x2, x3) with t = `seed` raised through
/// `n` rounds of `v -> 2^v`, certified by x8 = 0.
pub fn tower_pump(p: TowerParams) -> Result<Construction, ReductionError> {
    p.check()?;
    let program = tower_program();
    let core = expand(&program, &env(&[("n", p.n as i64), ("seed", p.seed as i64)]))?;
    let names = ["x1", "x2", "x3", "x4", "x5", "x6", "x7"];
    let core = expand_triple_tests(&core, &amplifier_triple(names))?;
    let core = instrument_ctrl(&core, &CtrlSpec::new("x8", &names))?;
    let mut target = match tower_value(p.seed, p.n) {
        Some(t) => vec![Bound::Exact(t), Bound::Free, Bound::Multiple { factor: t, of: 1 }],
        None => vec![
            Bound::Beyond(format!("T{}({})", p.n, p.seed)),
            Bound::Free,
            Bound::Beyond(format!("T{}({})*x2", p.n, p.seed)),
        ],
    };
    target.extend([0; 5].map(Bound::Exact));
    finish(
        "tower",
        vec![("n".into(), p.n.to_string()), ("seed".into(), p.seed.to_string())],
        EncodingKind::Unary,
        program,
        core,
        vec![0; 8],
        target,
    )
}

/// A parameterised construction that can be rebuilt from its manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Spec {
    SubsetSum(SubsetSumInstance),
    Pspace(PumpParams),
    Expspace(PumpParams),
    Tower(TowerParams),
}

impl Spec {
    pub fn build(&self) -> Result<Construction, ReductionError> {
        match self {
            Spec::SubsetSum(i) => subset_sum_to_vass(i),
            Spec::Pspace(p) => pspace_pump(*p),
            Spec::Expspace(p) => expspace_pump(*p),
            Spec::Tower(p) => tower_pump(*p),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Spec::SubsetSum(_) => "subset-sum",
            Spec::Pspace(_) => "pspace",
            Spec::Expspace(_) => "expspace",
            Spec::Tower(_) => "tower",
        }
    }

    /// Inverse of the `construction` and `param.*` manifest entries.
    pub fn from_params(id: &str, params: &[(String, String)]) -> Result<Spec, ReductionError> {
        let get = |k: &str| -> Result<&str, ReductionError> {
            params
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| ReductionError::InvalidParams(format!("missing parameter {k}")))
        };
        let num = |k: &str| -> Result<u32, ReductionError> {
            get(k)?
                .parse()
                .map_err(|_| ReductionError::InvalidParams(format!("parameter {k} is not a natural")))
        };
        match id {
            "subset-sum" => {
                let target = get("target")?
                    .parse::<u64>()
                    .map_err(|_| ReductionError::InvalidParams("target is not a natural".into()))?;
                let text = get("values")?;
                let values = text
                    .split(',')
                    .filter(|v| !v.is_empty())
                    .map(|v| v.trim().parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| ReductionError::InvalidParams(format!("bad values `{text}`")))?;
                Ok(Spec::SubsetSum(SubsetSumInstance { target, values }))
            }
            "pspace" => Ok(Spec::Pspace(PumpParams::new(num("s")?, num("n")?))),
            "expspace" => Ok(Spec::Expspace(PumpParams::new(num("s")?, num("n")?))),
            "tower" => Ok(Spec::Tower(TowerParams::new(num("n")?, num("seed")?))),
            other => Err(ReductionError::InvalidParams(format!(
                "construction `{other}` cannot be rebuilt from parameters"
            ))),
        }
    }
}

/// Shared skeleton of both translations: one VASS state per automaton
/// state, plain updates shifted by `offset` with the complement kept on
/// counter 0, and each zero test replaced by `test(counter)` followed by
/// the transition's effect.
fn translate(
    a: &CounterAutomaton,
    name: &str,
    lead: &[&str],
    test: &dyn Fn(usize) -> Vec<CoreStmt>,
) -> Result<(Vass, StateId, StateId, StateId), ReductionError> {
    let offset = lead.len();
    let sys = a.system();
    let init = a
        .initial()
        .ok_or_else(|| ReductionError::InvalidParams("automaton has no initial state".into()))?;
    let acc = a
        .accepting()
        .ok_or_else(|| ReductionError::InvalidParams("automaton has no accepting state".into()))?;
    let mut v = Vass::new(name, offset + a.dimension())?;
    let q_in = v.add_state("q_I")?;
    for s in sys.states() {
        v.add_state(format!("a.{s}"))?;
    }
    let id = |s: StateId| s + 1;
    let shifted = |eff: &[i64]| -> Vec<(usize, i64)> {
        let mut out: Vec<(usize, i64)> = eff
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(i, &e)| (i + offset, e))
            .collect();
        let net: i64 = eff.iter().sum();
        if net != 0 {
            out.push((0, -net));
        }
        out
    };
    for (ti, (t, zt)) in a.transitions().enumerate() {
        let update = CoreStmt::Update(shifted(&t.effect));
        match zt {
            None => {
                let CoreStmt::Update(entries) = &update else { unreachable!() };
                let mut eff = vec![0; v.dimension()];
                for &(i, e) in entries {
                    eff[i] += e;
                }
                v.add_transition(id(t.from), eff, id(t.to))?;
            }
            Some(k) => {
                let mut body = test(k + offset);
                body.push(update);
                let placed = compile_into(&mut v, &body, id(t.from), false, &format!("t{ti}."))?;
                v.add_transition(placed.exit, vec![0; offset + a.dimension()], id(t.to))?;
            }
        }
    }
    Ok((v, q_in, id(init), id(acc)))
}

pub const PAD: &str = "pad";

/// Triple simulation: q_I(B, 2C, 2BC, 0^d) reaches q_F(B, 0^(d+2)) iff the
/// automaton has a B-bounded accepting run with at most C zero tests.
pub fn ca_to_vass_triple(
    a: &CounterAutomaton,
    bound: i64,
    tests: i64,
) -> Result<Construction, ReductionError> {
    if bound < 1 || tests < 0 {
        return Err(ReductionError::InvalidParams("need B >= 1 and C >= 0".into()));
    }
    let d = a.dimension();
    let spec = TripleSpec {
        b: 0,
        c: 1,
        d: 2,
        family: (3..3 + d).collect(),
    };
    let (mut v, q_in, init, acc) =
        translate(a, "ca-triple", &["b", "c", "d"], &|x| triple_test_body(x, &spec).unwrap())?;
    let two_c = tests.checked_mul(2).ok_or_else(|| overflow("2C"))?;
    let two_bc = two_c.checked_mul(bound).ok_or_else(|| overflow("2BC"))?;
    let mut prologue = vec![0; 3 + d];
    prologue[0] = -1;
    prologue[2] = -two_c;
    v.add_transition(q_in, prologue, init)?;
    let tail = vec![
        CoreStmt::Loop {
            label: Some(PAD.into()),
            body: triple_test_body(3, &spec).unwrap(),
        },
        CoreStmt::Update(vec![(0, 1)]),
    ];
    let placed = compile_into(&mut v, &tail, acc, false, "fin.")?;
    let q_f = placed.exit;
    v.set_initial(q_in);
    v.set_final(q_f);
    let mut source = vec![bound, two_c, two_bc];
    source.extend(vec![0; d]);
    let mut target = vec![bound];
    target.extend(vec![0; d + 2]);
    Ok(Construction {
        id: "ca-triple",
        params: vec![
            ("automaton".into(), a.system().name().to_string()),
            ("B".into(), bound.to_string()),
            ("C".into(), tests.to_string()),
        ],
        encoding: EncodingKind::Unary,
        program: None,
        core: None,
        frags: vec![],
        source: Endpoint::exact(q_in, &source),
        target: Endpoint::exact(q_f, &target),
        vass: v,
    })
}

/// Pair simulation for B-bounded automata: q_I(2B, 4B^2, 0^d) reaches
/// q_F(0^(d+2)) iff the automaton has an accepting run.
pub fn ca_to_vass_pair(a: &CounterAutomaton, bound: i64) -> Result<Construction, ReductionError> {
    if bound < 1 {
        return Err(ReductionError::InvalidParams("need B >= 1".into()));
    }
    let d = a.dimension();
    let spec = PairSpec {
        b: 0,
        c: 1,
        family: (2..2 + d).collect(),
    };
    let (mut v, q_in, init, acc) =
        translate(a, "ca-pair", &["b", "c"], &|x| pair_test_body(x, &spec).unwrap())?;
    v.add_transition(q_in, vec![0; 2 + d], init)?;
    let placed = compile_into(&mut v, &pair_epilogue(&spec), acc, false, "fin.")?;
    let q_f = placed.exit;
    v.set_initial(q_in);
    v.set_final(q_f);
    let two_b = bound.checked_mul(2).ok_or_else(|| overflow("2B"))?;
    let sq = two_b.checked_mul(two_b).ok_or_else(|| overflow("4B^2"))?;
    let mut source = vec![two_b, sq];
    source.extend(vec![0; d]);
    Ok(Construction {
        id: "ca-pair",
        params: vec![
            ("automaton".into(), a.system().name().to_string()),
            ("B".into(), bound.to_string()),
        ],
        encoding: EncodingKind::Unary,
        program: None,
        core: None,
        frags: vec![],
        source: Endpoint::exact(q_in, &source),
        target: Endpoint::exact(q_f, &vec![0; d + 2]),
        vass: v,
    })
}

/// Number of zero tests a pair simulation must afford: 2 s d B^(d-1).
pub fn zero_test_budget(s: u64, d: u32, bound: u64) -> Result<u64, ReductionError> {
    if s == 0 || d == 0 || bound == 0 {
        return Err(ReductionError::InvalidParams("s, d and B must be at least 1".into()));
    }
    bound
        .checked_pow(d - 1)
        .and_then(|p| p.checked_mul(2))
        .and_then(|p| p.checked_mul(s))
        .and_then(|p| p.checked_mul(d as u64))
        .ok_or_else(|| overflow("2sdB^(d-1)"))
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_sum_is_flat_and_four_dimensional() {
        let c = subset_sum_to_vass(&SubsetSumInstance::new(3, &[1, 2])).unwrap();
        assert_eq!(c.vass.dimension(), 4);
        assert!(c.vass.is_flat());
        assert_eq!(c.param("k"), Some("2"));
    }

    #[test]
    fn width_padding() {
        assert_eq!(SubsetSumInstance::new(0, &[]).width(), 2);
        assert_eq!(SubsetSumInstance::new(7, &[1]).width(), 3);
        assert_eq!(SubsetSumInstance::new(8, &[1]).width(), 4);
    }

    #[test]
    fn pspace_contract() {
        let c = pspace_pump(PumpParams::new(1, 1)).unwrap();
        let m = c.manifest();
        assert!(m.get("target").unwrap().ends_with("(8,64,0,0,0)"));
        assert_eq!(m.get("dimension"), Some("5"));
        assert!(pspace_pump(PumpParams::new(0, 1)).is_err());
    }

    #[test]
    fn expspace_contract() {
        let c = expspace_pump(PumpParams::new(1, 1)).unwrap();
        assert!(c
            .target
            .render(&c.vass)
            .ends_with("(96,9216,0,0,0,0)"));
        assert_eq!(expspace_guess(PumpParams::new(1, 1)), Some(9312));
        assert!(c.vass.transitions().iter().any(|t| t.effect[5] == 18));
        let far = expspace_pump(PumpParams::new(1, 5)).unwrap();
        assert!(matches!(far.target.bounds[0], Bound::Beyond(_)));
    }

    #[test]
    fn tower_values() {
        assert_eq!(tower_value(1, 1), Some(2));
        assert_eq!(tower_value(1, 2), Some(4));
        assert_eq!(tower_value(1, 3), Some(16));
        assert_eq!(tower_value(8, 1), Some(256));
        assert_eq!(tower_value(8, 2), None);
        assert!(tower_pump(TowerParams::new(1, 3)).is_err());
        let c = tower_pump(TowerParams::new(2, 8)).unwrap();
        assert!(!c.core.as_ref().unwrap().has_markers());
    }

    #[test]
    fn compose_pads_and_links() {
        let p = pspace_pump(PumpParams::new(1, 1)).unwrap();
        let mut v2 = Vass::new("v2", 4).unwrap();
        let q = v2.add_state("q").unwrap();
        v2.set_initial(q);
        v2.set_final(q);
        let c = sequential_compose(&p.vass, &v2, 5).unwrap();
        assert_eq!(c.dimension(), 5);
        assert_eq!(c.transitions().len(), p.vass.transitions().len() + 1);
        let link = c.transitions().last().unwrap();
        assert!(link.effect.iter().all(|&e| e == 0));
        assert!(sequential_compose(&p.vass, &v2, 4).is_err());
    }

    #[test]
    fn budget_formula() {
        assert_eq!(zero_test_budget(3, 2, 4).unwrap(), 48);
        assert_eq!(zero_test_budget(1, 1, 7).unwrap(), 2);
        assert!(zero_test_budget(1, 64, u64::MAX).is_err());
        assert!(zero_test_budget(0, 1, 1).is_err());
    }

    #[test]
    fn translation_contracts() {
        let mut a = CounterAutomaton::new("a", 1).unwrap();
        let q = a.add_state("q").unwrap();
        a.set_initial(q);
        a.set_accepting(q);
        let t = ca_to_vass_triple(&a, 4, 3).unwrap();
        assert_eq!(t.source.config().unwrap().counters.0, vec![4, 6, 24, 0]);
        let p = ca_to_vass_pair(&a, 5).unwrap();
        assert_eq!(p.source.config().unwrap().counters.0, vec![10, 100, 0]);
    }
}
