use std::path::PathBuf;
use std::process::{Command, Output};

fn vasslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vasslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vasslab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn reduce_pspace_reports_endpoint() {
    let o = vasslab(&["reduce", "pspace", "--s", "1", "--n", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let target = text.lines().find(|l| l.starts_with("# target=")).unwrap();
    assert!(target.ends_with("(8,64,0,0,0)"), "{target}");
    assert!(text.contains("\nvass pspace dim 5\n"));
}

#[test]
fn canonical_witness_validates() {
    let path = scratch("pspace.cert");
    let o = vasslab(&["witness", "pspace", "--s", "1", "--n", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = vasslab(&["validate", path.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stderr));
    assert!(stdout(&v).contains("pspace.h4(8,64,0,0,0)"));

    // Dropping the last step breaks the endpoint contract.
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: Vec<&str> = text.lines().collect();
    let broken = scratch("broken.cert");
    std::fs::write(&broken, cut[..cut.len() - 1].join("\n")).unwrap();
    let v = vasslab(&["validate", broken.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn explore_with_budget_one_is_inconclusive() {
    let path = scratch("p.vass");
    let o = vasslab(&["reduce", "pspace", "--s", "1", "--n", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let e = vasslab(&["explore", path.to_str().unwrap(), "--caps", "32,256,64,0,96", "--budget", "1"]);
    assert_eq!(e.status.code(), Some(3));
    let r = vasslab(&["explore", path.to_str().unwrap(), "--caps", "32,256,64,0,96", "--to", "target"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).contains("witness 0 length"));
    let n = vasslab(&["explore", path.to_str().unwrap(), "--caps", "32,256,64,0,96", "--to", "pspace.h4(7,64,0,0,0)"]);
    assert_eq!(n.status.code(), Some(1));
}

#[test]
fn compile_two_pumps() {
    let prog = scratch("pumps.cp");
    std::fs::write(&prog, vasslab::verify::TWO_PUMPS).unwrap();
    let o = vasslab(&["compile", prog.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("state ")).count(), 5);
    assert_eq!(text.lines().filter(|l| l.starts_with("trans ")).count(), 8);
    let dot = vasslab(&["compile", prog.to_str().unwrap(), "--format", "dot"]);
    assert!(stdout(&dot).starts_with("digraph"));
}

#[test]
fn compile_with_params_and_markers() {
    let prog = scratch("ctrl.cp");
    std::fs::write(
        &prog,
        "program t(n) counters x c { for i := 1 to n { x += 1; } loop { x -= 1; } zerotest x via ctrl(c); }",
    )
    .unwrap();
    let o = vasslab(&["compile", prog.to_str().unwrap(), "--param", "n=2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(1,1)"));
    let missing = vasslab(&["compile", prog.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn export_dot_of_automaton() {
    let a = scratch("a.ca");
    std::fs::write(
        &a,
        "vass a dim 1\nstate p\nstate q\ninit p\nfinal q\ntrans p (1) p\nztrans p (0) zt=1 q\n",
    )
    .unwrap();
    let o = vasslab(&["export-dot", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("digraph"));
    let t = vasslab(&["reduce", "ca-triple", a.to_str().unwrap(), "--bound", "2", "--param", "C=1"]);
    assert_eq!(t.status.code(), Some(0), "{}", String::from_utf8_lossy(&t.stderr));
    assert!(stdout(&t).contains("# construction=ca-triple"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(vasslab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(vasslab(&["verify", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(vasslab(&["reduce", "ca-pair"]).status.code(), Some(2));
    assert_eq!(vasslab(&["explore", "/no/such/file", "--caps", "1"]).status.code(), Some(2));
}

#[test]
fn infeasible_tower_seed_exits_one() {
    let o = vasslab(&["witness", "tower", "--n", "1", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}

#[test]
fn output_is_byte_identical() {
    let a = vasslab(&["verify", "coefficients"]);
    let b = vasslab(&["verify", "coefficients", "--jobs", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let w1 = vasslab(&["witness", "subset-sum", "--param", "target=3", "--param", "values=1,2", "--mutants", "20", "--seed", "5"]);
    let w2 = vasslab(&["witness", "subset-sum", "--param", "target=3", "--param", "values=1,2", "--mutants", "20", "--seed", "5"]);
    assert_eq!(w1.status.code(), Some(0));
    assert_eq!(w1.stdout, w2.stdout);
}
