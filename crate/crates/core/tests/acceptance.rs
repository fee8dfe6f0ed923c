//! One PASS/FAIL line per acceptance criterion. Exact agreement everywhere;
//! the only tolerances are the wall-clock limits, checked here rather than
//! in the reports so reports stay byte-identical.

use std::process::Command;
use std::time::{Duration, Instant};

use vasslab::verify::{render_all, run, Suite, SuiteReport, VerifyOptions};

fn limit(suite: Suite) -> Option<Duration> {
    let secs = match suite {
        Suite::TwoPumps => 1,
        Suite::PspaceEndpoint => 300,
        Suite::SubsetSum => 900,
        Suite::Triples | Suite::Pairs => 600,
        Suite::ExpspaceWitness => 120,
        _ => return None,
    };
    Some(Duration::from_secs(secs))
}

fn main() {
    let opts = VerifyOptions::default();
    let mut reports: Vec<SuiteReport> = Vec::new();
    let mut verdicts: Vec<(u8, bool, String)> = Vec::new();
    for suite in Suite::ALL {
        let t = Instant::now();
        let r = run(suite, &opts);
        let elapsed = t.elapsed();
        let in_time = limit(suite).is_none_or(|l| elapsed <= l);
        if !r.pass || !in_time {
            eprint!("{}", r.render());
        }
        if !in_time {
            eprintln!("  {} exceeded {:?} ({:?})", suite.name(), limit(suite), elapsed);
        }
        let note = match limit(suite) {
            Some(l) => format!("{} (limit {}s)", suite.name(), l.as_secs()),
            None => suite.name().to_string(),
        };
        match verdicts.iter_mut().find(|v| v.0 == suite.criterion()) {
            Some(v) => {
                v.1 &= r.pass && in_time;
                v.2 = format!("{}, {note}", v.2);
            }
            None => verdicts.push((suite.criterion(), r.pass && in_time, note)),
        }
        reports.push(r);
    }

    // Determinism: the CLI with four workers must reproduce the in-process
    // single-worker report byte for byte.
    let expected = render_all(&reports);
    let cli = Command::new(env!("CARGO_BIN_EXE_vasslab"))
        .args(["verify", "all", "--jobs", "4"])
        .output()
        .expect("binary runs");
    let same = cli.stdout == expected.as_bytes();
    if !same {
        eprintln!("--- jobs 1 ---\n{expected}--- jobs 4 ---\n{}", String::from_utf8_lossy(&cli.stdout));
    }
    verdicts.push((9, same && cli.status.code() == Some(0), "verify all, jobs 1 vs 4, byte-identical".into()));

    let mut all = true;
    for (c, pass, note) in &verdicts {
        println!("criterion {c} {} {note}", if *pass { "PASS" } else { "FAIL" });
        all &= pass;
    }
    if !all {
        std::process::exit(1);
    }
}
