use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vbstl"))
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_trace(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn monitor_false_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_trace(&dir, "y.csv", "time,y\n0,-9\n0.1,-9\n0.2,-9\n");
    let o = run(&["monitor", "--formula", "alw (y >= 0)", "--trace", &trace, "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["truth"], false);
    assert_eq!(doc["robustness"], 9.0);
    assert_eq!(doc["signed"], -9.0);
    assert_eq!(doc["semantics"], "max");
    assert_eq!(doc["at"], 0);
}

#[test]
fn monitor_constant_semantics_and_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_trace(&dir, "y.csv", "time,y\n0,-9\n0.1,-9\n");
    let spec = fixtures().join("specs/static_switched.stl");
    let o = run(&[
        "monitor",
        "--spec",
        spec.to_str().unwrap(),
        "--trace",
        &trace,
        "--semantics",
        "constant",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("signed: -100"), "{}", stdout(&o));
}

#[test]
fn monitor_tautology_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_trace(&dir, "y.csv", "time,y\n0,3\n1,-2\n");
    let o = run(&["monitor", "--formula", "alw ((y >= 0) or (y < 0))", "--trace", &trace]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("truth: true"));
}

#[test]
fn monitor_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_trace(&dir, "y.csv", "time,y\n0,3\n");
    let missing = dir.path().join("missing.stl");
    let o = run(&["monitor", "--spec", missing.to_str().unwrap(), "--trace", &trace]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.stl"));

    let o = run(&["monitor", "--formula", "alw (z >= 0)", "--trace", &trace]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["monitor", "--formula", "alw_[2,1] (y > 0)", "--trace", &trace]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn monitor_params() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_trace(&dir, "w.csv", "time,w\n0,1000\n1,2500\n");
    let spec = fixtures().join("specs/at_phi1.stl");
    let spec = spec.to_str().unwrap();
    let o = run(&["monitor", "--spec", spec, "--trace", &trace]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["monitor", "--spec", spec, "--trace", &trace, "--param", "T=0.5"]);
    assert_eq!(o.status.code(), Some(1));
}

fn campaign_file(dir: &tempfile::TempDir, body: &str) -> String {
    let p = dir.path().join("campaign.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn falsify_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = campaign_file(
        &dir,
        r#"{"model": {"kind": "static_switched", "thresh": 0.7},
            "formula": "alw (y >= 0)", "repetitions": 1, "seed": 3}"#,
    );
    let o = run(&["falsify", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "run,seed,succ,iter,iter_per_succ,robustness,u1,u2");
    assert!(lines[1].starts_with("0,3,"));
    assert!(lines[2].starts_with("summary,,"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Iter/Succ"));
}

#[test]
fn falsify_is_reproducible_across_invocations_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = campaign_file(
        &dir,
        r#"{"model": {"kind": "static_switched", "thresh": 0.9},
            "formula": "alw (y >= 0)", "semantics": {"semantics": "additive"},
            "repetitions": 5, "max_iterations": 300, "seed": 42}"#,
    );
    let a = run(&["falsify", &cfg]);
    let b = run(&["falsify", &cfg, "--jobs", "3"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn falsify_writes_csv_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("campaigns/static_switched_0.9_constant.json");
    let out = dir.path().join("runs.csv");
    let traces = dir.path().join("traces");
    let o = run(&[
        "falsify",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--traces",
        traces.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 22);
    let summary: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let succ: usize = summary[2].parse().unwrap();
    assert!(succ >= 15, "constant semantics falsified only {succ}/20");
    assert!(traces.join("run_0.csv").exists());
    assert!(stdout(&o).contains("constant"));
}

#[test]
fn falsify_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = campaign_file(
        &dir,
        r#"{"model": {"kind": "static_switched", "thresh": 0.9}, "formula": "alw (y >= 0)",
            "repetitions": 0}"#,
    );
    assert_eq!(run(&["falsify", &cfg]).status.code(), Some(2));
    let cfg = campaign_file(&dir, r#"{"model": {"kind": "pendulum"}, "formula": "true"}"#);
    assert_eq!(run(&["falsify", &cfg]).status.code(), Some(2));
}

#[test]
fn translate_templates_and_blackbox() {
    let g = fixtures().join("graphs/fig1.json");
    let g = g.to_str().unwrap();
    let o = run(&["translate", "--graph", g, "--horizon", "10"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("alw"), "{}", stdout(&o));

    let o = run(&["translate", "--graph", g, "--horizon", "10", "--mode", "blackbox", "--json"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["manifest"][0]["reason"], "recursive-loop");
    assert_eq!(doc["manifest"][0]["signal"], "prev");

    let o = run(&["translate", "--graph", g, "--horizon", "10", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn translate_prints_tables() {
    let g = fixtures().join("graphs/fig3.json");
    let o = run(&["translate", "--graph", g.to_str().unwrap(), "--horizon", "5", "--tables"]);
    let text = stdout(&o);
    assert!(text.contains("[sub1]\ngear < 3 | 50\nnot (gear < 3) | 200"), "{text}");
}

#[test]
fn laws_pass() {
    let o = run(&["laws", "--cases", "500"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn fig5_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let iso = dir.path().join("iso.csv");
    let traces = dir.path().join("traces.csv");
    let o = run(&[
        "fig5",
        "--isobars",
        iso.to_str().unwrap(),
        "--traces",
        traces.to_str().unwrap(),
        "--step",
        "1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("trace,max,additive"));
    assert_eq!(text.lines().count(), 5);
    let iso = std::fs::read_to_string(iso).unwrap();
    assert_eq!(iso.lines().count(), 1 + 11 * 11);
    let traces = std::fs::read_to_string(traces).unwrap();
    assert!(traces.starts_with("time,a,b,c,d\n"));
}
