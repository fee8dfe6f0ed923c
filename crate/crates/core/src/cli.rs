//! Command-line front end. Exit codes: 0 yes/ok, 1 no/unreachable/contract
//! violated, 2 usage or internal error, 3 inconclusive.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::gadgets::eliminate_markers;
use crate::lang::{compile, expand, parse, Env};
use crate::reach::{
    canonical_witness, explore, find_run, mutate_and_check, Caps, WitnessCertificate,
    WitnessError, DEFAULT_BUDGET,
};
use crate::reductions::{ca_to_vass_pair, ca_to_vass_triple, Construction, Spec};
use crate::text::{
    automaton_to_dot, parse_automaton, parse_config, parse_run, parse_vass, to_dot, write_vass,
    Manifest,
};
use crate::vass::{Configuration, Vass};
use crate::verify::{render_all, run_many, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "vasslab", version, about = "Counter programs and VASS reachability constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Dot,
}

#[derive(Args, Debug)]
struct Output {
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug, Default)]
struct Params {
    /// Construction or program parameter, `key=value`. Repeatable.
    #[arg(long = "param", value_parser = parse_kv)]
    params: Vec<(String, String)>,
    #[arg(long)]
    s: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    SubsetSum,
    Pspace,
    Expspace,
    Tower,
    CaTriple,
    CaPair,
}

impl Kind {
    fn id(self) -> &'static str {
        match self {
            Kind::SubsetSum => "subset-sum",
            Kind::Pspace => "pspace",
            Kind::Expspace => "expspace",
            Kind::Tower => "tower",
            Kind::CaTriple => "ca-triple",
            Kind::CaPair => "ca-pair",
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, expand, eliminate markers and compile a counter program.
    Compile {
        program: PathBuf,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        output: Output,
    },
    /// Build a construction and print its VASS with the manifest as a header.
    Reduce {
        #[arg(value_enum)]
        kind: Kind,
        /// Counter automaton file (ca-triple, ca-pair).
        automaton: Option<PathBuf>,
        #[command(flatten)]
        params: Params,
        /// Bound B for the automaton translations.
        #[arg(long)]
        bound: Option<i64>,
        #[command(flatten)]
        output: Output,
    },
    /// Bounded exploration, or a reachability query with `--to`.
    Explore {
        vass: PathBuf,
        /// Start configuration, `state(v1,...)` or `source`. Defaults to the
        /// header's source, else the initial state with zero counters.
        #[arg(long)]
        from: Option<String>,
        /// Target configuration, `state(v1,...)` or `target`.
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        caps: Option<Vec<i64>>,
        /// Bound on the counter sum.
        #[arg(long)]
        sum: Option<i64>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Canonical witness certificate for a construction.
    Witness {
        #[arg(value_enum)]
        kind: Kind,
        #[command(flatten)]
        params: Params,
        /// Also replay this many random mutants of the run.
        #[arg(long)]
        mutants: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Replay a certificate, or a run file against `--vass`.
    Validate {
        file: PathBuf,
        #[arg(long)]
        vass: Option<PathBuf>,
    },
    /// Run verification suites (`all` or a suite name).
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graphviz rendering of a VASS or counter automaton file.
    ExportDot {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    if k.is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    Ok((k.to_string(), v.to_string()))
}

/// Failure carrying its exit code.
struct Fail(i32, String);

impl Fail {
    fn usage(m: impl Into<String>) -> Self {
        Fail(EXIT_ERROR, m.into())
    }
}

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(EXIT_ERROR, e.to_string())
    }
}

/// What a successful command produced.
struct Done {
    code: i32,
    text: String,
}

impl Done {
    fn ok(text: String) -> Self {
        Done { code: EXIT_OK, text }
    }
}

/// Runs one command. Results go to `out` (or the `--out` file), diagnostics
/// to `err`. Returns the exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let target = output_path(&cli.command);
    match dispatch(cli.command) {
        Ok(done) => {
            let written = match target {
                Some(p) => std::fs::write(&p, &done.text)
                    .map_err(|e| format!("cannot write {}: {e}", p.display())),
                None => out.write_all(done.text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => done.code,
                Err(m) => {
                    let _ = writeln!(err, "error: {m}");
                    EXIT_ERROR
                }
            }
        }
        Err(Fail(code, m)) => {
            let _ = writeln!(err, "error: {m}");
            code
        }
    }
}

fn output_path(c: &Command) -> Option<PathBuf> {
    match c {
        Command::Compile { output, .. }
        | Command::Reduce { output, .. }
        | Command::Explore { output, .. }
        | Command::Witness { output, .. } => output.out.clone(),
        Command::Verify { out, .. } | Command::ExportDot { out, .. } => out.clone(),
        Command::Validate { .. } => None,
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail::usage(format!("cannot read {}: {e}", path.display())))
}

fn dispatch(c: Command) -> Result<Done, Fail> {
    match c {
        Command::Compile {
            program,
            params,
            output,
        } => cmd_compile(&program, &params, output.format),
        Command::Reduce {
            kind,
            automaton,
            params,
            bound,
            output,
        } => {
            let cons = build(kind, automaton.as_deref(), &params, bound)?;
            Ok(Done::ok(match output.format {
                Format::Text => render_construction(&cons),
                Format::Dot => to_dot(&cons.vass, None),
            }))
        }
        Command::Explore {
            vass,
            from,
            to,
            caps,
            sum,
            budget,
            jobs,
            output: _,
        } => cmd_explore(&vass, from, to, caps, sum, budget, jobs),
        Command::Witness {
            kind,
            params,
            mutants,
            output,
        } => cmd_witness(kind, &params, mutants, output.format),
        Command::Validate { file, vass } => cmd_validate(&file, vass.as_deref()),
        Command::Verify {
            suite,
            jobs,
            seed,
            budget,
            out: _,
        } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![Suite::from_name(&suite).ok_or_else(|| {
                    let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                    Fail::usage(format!("unknown suite `{suite}`; expected all or one of {}", names.join(", ")))
                })?]
            };
            let mut opts = VerifyOptions {
                jobs: jobs.max(1),
                budget,
                ..Default::default()
            };
            if let Some(s) = seed {
                opts.seed = s;
            }
            let reports = run_many(&suites, &opts);
            let pass = reports.iter().all(|r| r.pass);
            Ok(Done {
                code: if pass { EXIT_OK } else { EXIT_NO },
                text: render_all(&reports),
            })
        }
        Command::ExportDot { file, out: _ } => {
            let text = read(&file)?;
            let dot = if text.lines().any(|l| l.trim_start().starts_with("ztrans")) {
                automaton_to_dot(&parse_automaton(&text)?)
            } else {
                to_dot(&parse_vass(&text)?, None)
            };
            Ok(Done::ok(dot))
        }
    }
}

fn cmd_compile(path: &Path, params: &Params, format: Format) -> Result<Done, Fail> {
    let program = parse(&read(path)?)?;
    let mut env = Env::new();
    for (k, v) in &params.params {
        let n: i64 = v
            .parse()
            .map_err(|_| Fail::usage(format!("parameter {k} must be an integer, got `{v}`")))?;
        env.insert(k.clone(), n);
    }
    for (k, v) in [("s", params.s.map(i64::from)), ("n", params.n.map(i64::from))] {
        if let Some(v) = v {
            env.insert(k.to_string(), v);
        }
    }
    let core = eliminate_markers(&expand(&program, &env)?)?;
    let compiled = compile(&core)?;
    Ok(Done::ok(match format {
        Format::Text => write_vass(&compiled.vass),
        Format::Dot => to_dot(&compiled.vass, None),
    }))
}

fn spec_params(params: &Params) -> Vec<(String, String)> {
    let mut out = params.params.clone();
    for (k, v) in [("s", params.s), ("n", params.n)] {
        if let Some(v) = v {
            out.push((k.to_string(), v.to_string()));
        }
    }
    if let Some(v) = params.seed {
        out.push(("seed".into(), v.to_string()));
    }
    // Defaults for the pumps, so `--s 1 --n 1` is all one needs to type.
    for (k, v) in [("s", "1"), ("n", "1"), ("seed", "8")] {
        if !out.iter().any(|(key, _)| key == k) {
            out.push((k.into(), v.into()));
        }
    }
    out
}

fn build(kind: Kind, automaton: Option<&Path>, params: &Params, bound: Option<i64>) -> Result<Construction, Fail> {
    match kind {
        Kind::CaTriple | Kind::CaPair => {
            let path = automaton.ok_or_else(|| Fail::usage(format!("{} needs an automaton file", kind.id())))?;
            let a = parse_automaton(&read(path)?)?;
            let b = bound.ok_or_else(|| Fail::usage("missing --bound"))?;
            if kind == Kind::CaPair {
                return Ok(ca_to_vass_pair(&a, b)?);
            }
            let c = params
                .params
                .iter()
                .find(|(k, _)| k == "C")
                .ok_or_else(|| Fail::usage("ca-triple needs --param C=<tests>"))?
                .1
                .parse::<i64>()
                .map_err(|_| Fail::usage("C must be an integer"))?;
            Ok(ca_to_vass_triple(&a, b, c)?)
        }
        _ => {
            if automaton.is_some() {
                return Err(Fail::usage(format!("{} takes no automaton file", kind.id())));
            }
            Ok(Spec::from_params(kind.id(), &spec_params(params))?.build()?)
        }
    }
}

fn render_construction(c: &Construction) -> String {
    let mut out = String::new();
    for (k, v) in &c.manifest().entries {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str(&write_vass(&c.vass));
    out
}

/// `# key=value` header lines written by `reduce`.
fn header_manifest(text: &str) -> Manifest {
    let mut m = Manifest::new();
    for line in text.lines() {
        if let Some((k, v)) = line.strip_prefix("# ").and_then(|l| l.split_once('=')) {
            m.push(k.trim(), v.trim());
        }
    }
    m
}

fn config_arg(v: &Vass, header: &Manifest, arg: &str, key: &str) -> Result<Configuration, Fail> {
    let literal = if arg == key {
        header
            .get(key)
            .ok_or_else(|| Fail::usage(format!("file has no `{key}` header")))?
    } else {
        arg
    };
    let c = parse_config(v, literal).map_err(Fail::usage)?;
    v.check_config(&c)?;
    Ok(c)
}

fn cmd_explore(
    path: &Path,
    from: Option<String>,
    to: Option<String>,
    caps: Option<Vec<i64>>,
    sum: Option<i64>,
    budget: usize,
    jobs: usize,
) -> Result<Done, Fail> {
    let text = read(path)?;
    let v = parse_vass(&text)?;
    let header = header_manifest(&text);
    let src = match from.as_deref() {
        Some(a) => config_arg(&v, &header, a, "source")?,
        None if header.get("source").is_some() => config_arg(&v, &header, "source", "source")?,
        None => {
            let i = v
                .initial()
                .ok_or_else(|| Fail::usage("VASS has no initial state; pass --from"))?;
            Configuration::new(i, vec![0; v.dimension()])
        }
    };
    let mut c = match (caps, sum) {
        (Some(cs), _) => Caps::per_counter(cs),
        (None, Some(s)) => Caps::sum(s),
        (None, None) => return Err(Fail::usage("explore needs --caps or --sum")),
    };
    if let (Some(s), true) = (sum, c.counters.is_some()) {
        c = c.with_sum(s);
    }
    let c = c.with_budget(budget);
    let jobs = jobs.max(1);
    match to {
        Some(t) => {
            let trg = config_arg(&v, &header, &t, "target")?;
            let (run, report) = find_run(&v, &src, &trg, &c, jobs)?;
            let mut text = report.render(&v);
            let code = match run {
                Some(_) => EXIT_OK,
                None if report.exhausted => {
                    text.push_str("unreachable within caps\n");
                    EXIT_NO
                }
                None => {
                    text.push_str("inconclusive: budget exhausted\n");
                    EXIT_INCONCLUSIVE
                }
            };
            Ok(Done { code, text })
        }
        None => {
            let report = explore(&v, &src, &c, jobs)?;
            let mut text = report.render(&v);
            let code = if report.exhausted {
                EXIT_OK
            } else {
                text.push_str("inconclusive: budget exhausted\n");
                EXIT_INCONCLUSIVE
            };
            Ok(Done { code, text })
        }
    }
}

fn cmd_witness(kind: Kind, params: &Params, mutants: Option<usize>, format: Format) -> Result<Done, Fail> {
    if matches!(kind, Kind::CaTriple | Kind::CaPair) {
        return Err(Fail::usage(format!("no canonical witness for {}", kind.id())));
    }
    let spec = Spec::from_params(kind.id(), &spec_params(params))?;
    let w = match canonical_witness(&spec) {
        Ok(w) => w,
        Err(e @ WitnessError::InfeasibleParams(_)) => return Err(Fail(EXIT_NO, e.to_string())),
        Err(e) => return Err(e.into()),
    };
    if format == Format::Dot {
        return Ok(Done::ok(to_dot(&w.construction.vass, None)));
    }
    let mut text = w.certificate.render(&w.construction.vass);
    let mut code = EXIT_OK;
    if let Some(m) = mutants {
        let report = mutate_and_check(&w.certificate, &w.construction, m, params.seed.unwrap_or(0));
        for line in report.render().lines() {
            let _ = writeln!(text, "# {line}");
        }
        if !report.survivors.is_empty() {
            code = EXIT_NO;
        }
    }
    Ok(Done { code, text })
}

fn cmd_validate(path: &Path, vass: Option<&Path>) -> Result<Done, Fail> {
    let text = read(path)?;
    match vass {
        None => {
            let (cons, cert) = WitnessCertificate::parse(&text)?;
            match cert.check(&cons) {
                Ok(()) => Ok(Done::ok(format!(
                    "valid: {} steps, ends {}\n",
                    cert.run.len(),
                    cons.vass.show(&cert.endpoint)
                ))),
                Err(e) => Err(Fail(EXIT_NO, e.to_string())),
            }
        }
        Some(vp) => {
            let v = parse_vass(&read(vp)?)?;
            let run = parse_run(&v, &text)?;
            match v.validate_run(&run) {
                Ok((end, _)) => Ok(Done::ok(format!(
                    "valid: {} steps, ends {}\n",
                    run.len(),
                    v.show(&end)
                ))),
                Err(e) => Err(Fail(EXIT_NO, e.to_string())),
            }
        }
    }
}
