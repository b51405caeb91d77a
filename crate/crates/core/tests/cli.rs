use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SCENARIO: &str = r#"{
  "tree": {"kind": "binary", "steps": 3},
  "sub": {"mode": "random", "max_split": 2},
  "problem": {"f": "0.5 - 0.4 * y + 0.3 * z", "L": "-0.2 + 0.3 * w - 0.1 * t", "U": "0.25 + 0.3 * w", "xi": "0.1 * w"},
  "penalty": {"lo": 4, "hi": 7},
  "switching": {"psi1": "1 + w", "psi2": "0.5", "D": "0.1", "a": "0.2"}
}"#;

fn crbsde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crbsde")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v["wall_clock_seconds"] = Value::Null;
    v
}

#[test]
fn solve_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SCENARIO);
    let out = dir.path().join("out");
    let o = crbsde(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--check", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["version"], "crbsde-report/1");
    assert_eq!(r["command"], "solve");
    assert_eq!(r["result"]["diagnostics"]["passed"], true);
    for t in ["y", "z", "k_plus", "k_minus", "y_g"] {
        let csv = fs::read_to_string(out.join(format!("{t}.csv"))).unwrap();
        assert!(csv.starts_with("level,"), "{t}");
    }
}

#[test]
fn deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SCENARIO);
    let mut reports = Vec::new();
    for (i, threads) in ["1", "4", "1"].iter().enumerate() {
        for cmd in ["solve", "penalize-sweep", "switch"] {
            let out = dir.path().join(format!("{cmd}-{i}"));
            let o = crbsde(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads, "--seed", "9"]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            reports.push((cmd, report(&out), fs::read_to_string(out.join(format!("{}.csv", if cmd == "penalize-sweep" { "sweep" } else { "y1" }))).ok()));
        }
    }
    for (cmd, r, csv) in &reports[3..] {
        let (_, r0, csv0) = reports.iter().find(|(c, _, _)| c == cmd).unwrap();
        assert_eq!(r, r0, "{cmd}");
        assert_eq!(csv, csv0, "{cmd}");
    }
}

#[test]
fn sweep_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SCENARIO);
    let out = dir.path().join("out");
    assert!(crbsde(&["penalize-sweep", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,v,d"));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(report(&out)["result"]["violation_slope"].is_number());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let missing = write(dir.path(), "m.json", &SCENARIO.replace(r#", "U": "0.25 + 0.3 * w""#, ""));
    let o = crbsde(&["solve", "--config", &missing, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`U`"));

    let bad_expr = write(dir.path(), "e.json", &SCENARIO.replace("0.5 - 0.4 * y", "0.5 - 0.4 * * y"));
    let o = crbsde(&["solve", "--config", &bad_expr, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("position"));

    let crossed = write(dir.path(), "x.json", &SCENARIO.replace("0.25 + 0.3 * w", "-0.3 + 0.3 * w"));
    assert_eq!(crbsde(&["solve", "--config", &crossed, "--out", out]).status.code(), Some(3));

    let outside = write(dir.path(), "o.json", &SCENARIO.replace(r#""xi": "0.1 * w""#, r#""xi": "5""#));
    assert_eq!(crbsde(&["solve", "--config", &outside, "--out", out]).status.code(), Some(3));

    let capped = write(dir.path(), "cap.json", &SCENARIO.replace(r#""penalty""#, r#""solver": {"max_iter": 1, "tol": 1e-300}, "penalty""#));
    assert_eq!(crbsde(&["solve", "--config", &capped, "--out", out]).status.code(), Some(4));

    let tiny_cap = write(dir.path(), "enum.json", &SCENARIO.replace(r#""penalty""#, r#""solver": {"enumeration_cap": 3}, "penalty""#));
    assert_eq!(crbsde(&["switch", "--config", &tiny_cap, "--out", out, "--check"]).status.code(), Some(5));

    assert_eq!(crbsde(&["solve", "--out", out]).status.code(), Some(2));
}

#[test]
fn gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    assert!(crbsde(&["gen", "--seed", "3", "--out", out.to_str().unwrap()]).status.success());
    let scenario = out.join("scenario.json");
    let solved = dir.path().join("solved");
    let o = crbsde(&["solve", "--config", scenario.to_str().unwrap(), "--out", solved.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn skorokhod_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"skorokhod": {"x": [0.5, 2, -3, 0], "lower": [-1, -1, -1, -1], "upper": [1, 1, 1, 1]}}"#);
    let out = dir.path().join("out");
    assert!(crbsde(&["skorokhod", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("reflection.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("index,x,lower,upper,y,k,k_plus,k_minus"));
}
