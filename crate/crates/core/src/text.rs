//! Line-oriented text formats.
//!
//! ```text
//! vass <name> dim <d>
//! state <id>
//! init <id>
//! final <id>
//! trans <from> (<i1>,...,<id>) <to>
//! ztrans <from> (<i1>,...,<id>) zt=<k> <to>     # automata only, k is 1-based
//! ```
//!
//! Runs are `start <config>` followed by `step <from> (<effect>) <to>` lines.
//! Manifests are `key=value` lines.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::vass::{Configuration, CounterAutomaton, CounterVector, Run, StateId, Vass};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct TextError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> TextError {
    TextError {
        line,
        message: message.into(),
    }
}

/// Lines with comments stripped, paired with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = match l.find('#') {
            Some(p) => &l[..p],
            None => l,
        };
        let l = l.trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

/// Parses `(1,-2,3)`.
pub fn parse_vector(s: &str) -> Result<CounterVector, String> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("expected a parenthesised vector, got `{s}`"))?;
    if inner.trim().is_empty() {
        return Ok(CounterVector(Vec::new()));
    }
    inner
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<i64>()
                .map_err(|_| format!("bad vector entry `{}`", p.trim()))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(CounterVector)
}

/// Splits `name(1,2)` into its state name and vector.
pub fn split_config_literal(s: &str) -> Result<(&str, CounterVector), String> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| format!("configuration `{s}` lacks a vector"))?;
    let name = &s[..open];
    if name.is_empty() {
        return Err(format!("configuration `{s}` lacks a state name"));
    }
    Ok((name, parse_vector(&s[open..])?))
}

pub fn parse_config(vass: &Vass, s: &str) -> Result<Configuration, String> {
    let (name, v) = split_config_literal(s)?;
    vass.config(name, &v).map_err(|e| e.to_string())
}

/// Effect vectors are whitespace-free, so a transition line is exactly four
/// or five tokens.
struct RawSystem {
    name: String,
    dimension: usize,
    states: Vec<String>,
    init: Option<String>,
    fin: Option<String>,
    transitions: Vec<(usize, String, CounterVector, Option<usize>, String)>,
}

fn parse_raw(text: &str) -> Result<RawSystem, TextError> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let (name, dimension) = match toks.as_slice() {
        ["vass", name, "dim", d] => (
            name.to_string(),
            d.parse::<usize>()
                .map_err(|_| err(hl, format!("bad dimension `{d}`")))?,
        ),
        _ => return Err(err(hl, "expected `vass <name> dim <d>`")),
    };
    let mut raw = RawSystem {
        name,
        dimension,
        states: Vec::new(),
        init: None,
        fin: None,
        transitions: Vec::new(),
    };
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["state", id] => raw.states.push(id.to_string()),
            ["init", id] => raw.init = Some(id.to_string()),
            ["final", id] => raw.fin = Some(id.to_string()),
            ["trans", from, eff, to] => {
                let v = parse_vector(eff).map_err(|m| err(ln, m))?;
                raw.transitions
                    .push((ln, from.to_string(), v, None, to.to_string()));
            }
            ["ztrans", from, eff, zt, to] => {
                let v = parse_vector(eff).map_err(|m| err(ln, m))?;
                let k = zt
                    .strip_prefix("zt=")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| err(ln, format!("bad zero-test marker `{zt}`")))?;
                raw.transitions
                    .push((ln, from.to_string(), v, Some(k - 1), to.to_string()));
            }
            _ => return Err(err(ln, format!("unrecognised line `{line}`"))),
        }
    }
    Ok(raw)
}

fn build(raw: RawSystem) -> Result<(Vass, Vec<Option<usize>>), TextError> {
    let mut vass = Vass::new(raw.name, raw.dimension).map_err(|e| err(1, e.to_string()))?;
    for s in &raw.states {
        vass.add_state(s.as_str()).map_err(|e| err(0, e.to_string()))?;
    }
    let lookup = |vass: &Vass, name: &str, ln: usize| -> Result<StateId, TextError> {
        vass.state_id(name)
            .ok_or_else(|| err(ln, format!("undeclared state `{name}`")))
    };
    if let Some(i) = &raw.init {
        let id = lookup(&vass, i, 0)?;
        vass.set_initial(id);
    }
    if let Some(f) = &raw.fin {
        let id = lookup(&vass, f, 0)?;
        vass.set_final(id);
    }
    let mut tests = Vec::with_capacity(raw.transitions.len());
    for (ln, from, eff, zt, to) in raw.transitions {
        let from = lookup(&vass, &from, ln)?;
        let to = lookup(&vass, &to, ln)?;
        if let Some(k) = zt {
            if k >= raw.dimension {
                return Err(err(ln, format!("zero-test counter {} out of range", k + 1)));
            }
        }
        vass.add_transition(from, eff, to)
            .map_err(|e| err(ln, e.to_string()))?;
        tests.push(zt);
    }
    Ok((vass, tests))
}

pub fn parse_vass(text: &str) -> Result<Vass, TextError> {
    let raw = parse_raw(text)?;
    if let Some(t) = raw.transitions.iter().find(|t| t.3.is_some()) {
        return Err(err(t.0, "zero-test transition in a plain VASS"));
    }
    Ok(build(raw)?.0)
}

pub fn parse_automaton(text: &str) -> Result<CounterAutomaton, TextError> {
    let (vass, tests) = build(parse_raw(text)?)?;
    let mut a = CounterAutomaton::new(vass.name(), vass.dimension()).map_err(|e| err(1, e.to_string()))?;
    for s in vass.states() {
        a.add_state(s.as_str()).map_err(|e| err(0, e.to_string()))?;
    }
    if let Some(i) = vass.initial() {
        a.set_initial(i);
    }
    if let Some(f) = vass.final_state() {
        a.set_accepting(f);
    }
    for (t, zt) in vass.transitions().iter().zip(tests) {
        let r = match zt {
            Some(k) => a.add_zero_test(t.from, t.effect.clone(), k, t.to),
            None => a.add_update(t.from, t.effect.clone(), t.to),
        };
        r.map_err(|e| err(0, e.to_string()))?;
    }
    Ok(a)
}

fn write_header(out: &mut String, vass: &Vass) {
    let _ = writeln!(out, "vass {} dim {}", vass.name(), vass.dimension());
    for s in vass.states() {
        let _ = writeln!(out, "state {s}");
    }
    if let Some(i) = vass.initial() {
        let _ = writeln!(out, "init {}", vass.state_name(i));
    }
    if let Some(f) = vass.final_state() {
        let _ = writeln!(out, "final {}", vass.state_name(f));
    }
}

pub fn write_vass(vass: &Vass) -> String {
    let mut out = String::new();
    write_header(&mut out, vass);
    for t in vass.transitions() {
        let _ = writeln!(
            out,
            "trans {} {} {}",
            vass.state_name(t.from),
            t.effect,
            vass.state_name(t.to)
        );
    }
    out
}

pub fn write_automaton(a: &CounterAutomaton) -> String {
    let vass = a.system();
    let mut out = String::new();
    write_header(&mut out, vass);
    for (t, zt) in a.transitions() {
        let from = vass.state_name(t.from);
        let to = vass.state_name(t.to);
        let _ = match zt {
            Some(k) => writeln!(out, "ztrans {from} {} zt={} {to}", t.effect, k + 1),
            None => writeln!(out, "trans {from} {} {to}", t.effect),
        };
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: one node per state, one edge per transition labelled
/// with its effect vector (and zero-test, for automata).
pub fn to_dot(vass: &Vass, zero_tests: Option<&[Option<usize>]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(vass.name()));
    let _ = writeln!(out, "  rankdir=LR;");
    for (i, s) in vass.states().iter().enumerate() {
        let shape = if Some(i) == vass.final_state() {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(out, "  \"{}\" [shape={shape}];", dot_escape(s));
    }
    if let Some(i) = vass.initial() {
        let _ = writeln!(out, "  \"__start\" [shape=point];");
        let _ = writeln!(
            out,
            "  \"__start\" -> \"{}\";",
            dot_escape(vass.state_name(i))
        );
    }
    for (k, t) in vass.transitions().iter().enumerate() {
        let mut label = t.effect.to_string();
        if let Some(Some(c)) = zero_tests.and_then(|z| z.get(k)) {
            let _ = write!(label, " zt={}", c + 1);
        }
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            dot_escape(vass.state_name(t.from)),
            dot_escape(vass.state_name(t.to)),
            label
        );
    }
    out.push_str("}\n");
    out
}

pub fn automaton_to_dot(a: &CounterAutomaton) -> String {
    let tests: Vec<_> = a.transitions().map(|(_, z)| z).collect();
    to_dot(a.system(), Some(&tests))
}

pub fn write_run(vass: &Vass, run: &Run) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "start {}", vass.show(&run.start));
    for &t in &run.steps {
        let tr = &vass.transitions()[t];
        let _ = writeln!(
            out,
            "step {} {} {}",
            vass.state_name(tr.from),
            tr.effect,
            vass.state_name(tr.to)
        );
    }
    out
}

/// Parses `start`/`step` lines, ignoring any other lines (manifest keys).
/// A step resolves to the first declared transition with the same endpoints
/// and effect.
pub fn parse_run(vass: &Vass, text: &str) -> Result<Run, TextError> {
    let mut by_shape: HashMap<(StateId, StateId, &[i64]), usize> = HashMap::new();
    for (i, t) in vass.transitions().iter().enumerate() {
        by_shape.entry((t.from, t.to, &t.effect)).or_insert(i);
    }
    let mut start = None;
    let mut steps = Vec::new();
    for (ln, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["start", c] => {
                start = Some(parse_config(vass, c).map_err(|m| err(ln, m))?);
            }
            ["step", from, eff, to] => {
                let f = vass
                    .state_id(from)
                    .ok_or_else(|| err(ln, format!("unknown state `{from}`")))?;
                let t = vass
                    .state_id(to)
                    .ok_or_else(|| err(ln, format!("unknown state `{to}`")))?;
                let e = parse_vector(eff).map_err(|m| err(ln, m))?;
                let idx = by_shape
                    .get(&(f, t, &e[..]))
                    .ok_or_else(|| err(ln, format!("no transition {from} {eff} {to}")))?;
                steps.push(*idx);
            }
            _ => {}
        }
    }
    let start = start.ok_or_else(|| err(0, "run has no `start` line"))?;
    Ok(Run { start, steps })
}

/// Ordered `key=value` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Collects every `key=value` line whose key has no whitespace.
    pub fn parse(text: &str) -> Manifest {
        let mut m = Manifest::new();
        for (_, line) in content_lines(text) {
            if let Some((k, v)) = line.split_once('=') {
                if !k.is_empty() && !k.contains(char::is_whitespace) {
                    m.push(k, v);
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# a tiny system
vass demo dim 2
state s
state p
init s
final p
trans s (1,0) p
trans p (-1,1) p   # loop
";

    #[test]
    fn parse_and_write_vass() {
        let v = parse_vass(SAMPLE).unwrap();
        assert_eq!(v.dimension(), 2);
        assert_eq!(v.states().len(), 2);
        assert_eq!(v.transitions().len(), 2);
        assert_eq!(v.transitions()[1].effect, CounterVector(vec![-1, 1]));
        let again = parse_vass(&write_vass(&v)).unwrap();
        assert_eq!(again, v);
    }

    #[test]
    fn undeclared_state_is_an_error() {
        let e = parse_vass("vass x dim 1\nstate a\ntrans a (1) b\n").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn plain_parser_rejects_zero_tests() {
        let text = "vass x dim 1\nstate a\nztrans a (0) zt=1 a\n";
        assert!(parse_vass(text).is_err());
        let a = parse_automaton(text).unwrap();
        assert_eq!(a.zero_test(0), Some(0));
        assert_eq!(write_automaton(&a), text);
    }

    #[test]
    fn config_literal() {
        let v = parse_vass(SAMPLE).unwrap();
        let c = parse_config(&v, "p(1,1)").unwrap();
        assert_eq!(v.show(&c), "p(1,1)");
        assert!(parse_config(&v, "p(1)").is_err());
        assert!(parse_config(&v, "p(-1,0)").is_err());
        assert!(parse_config(&v, "zz(0,0)").is_err());
    }

    #[test]
    fn run_round_trip() {
        let v = parse_vass(SAMPLE).unwrap();
        let run = Run {
            start: v.config("s", &[0, 0]).unwrap(),
            steps: vec![0, 1],
        };
        let text = write_run(&v, &run);
        assert_eq!(text, "start s(0,0)\nstep s (1,0) p\nstep p (-1,1) p\n");
        assert_eq!(parse_run(&v, &text).unwrap(), run);
    }

    #[test]
    fn dot_has_every_edge() {
        let v = parse_vass(SAMPLE).unwrap();
        let dot = to_dot(&v, None);
        assert!(dot.contains("\"s\" -> \"p\" [label=\"(1,0)\"];"));
        assert!(dot.contains("\"p\" -> \"p\" [label=\"(-1,1)\"];"));
        assert!(dot.contains("\"p\" [shape=doublecircle];"));
    }

    #[test]
    fn manifest_keeps_order() {
        let mut m = Manifest::new();
        m.push("construction", "pspace").push("param.s", 1);
        let text = m.render();
        assert_eq!(text, "construction=pspace\nparam.s=1\n");
        assert_eq!(Manifest::parse(&text), m);
        assert_eq!(m.get("param.s"), Some("1"));
    }
}
