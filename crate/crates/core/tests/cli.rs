use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgd-bands"))
}

fn exec(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn put(dir: &Path, name: &str, v: &Value) {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn read(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn inverse(eta0: f64, h: u64) -> Value {
    json!({"family": "inverse_time", "params": {"eta0": eta0}, "horizon": h})
}

#[test]
fn schedule_prints_every_step() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "s.json", &inverse(2.0, 4));
    let out = exec(&["schedule", "--spec", "s.json"], dir.path());
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "t,eta\n1,2.0\n2,1.0\n3,0.6666666666666666\n4,0.5\n"
    );
    let out = exec(
        &[
            "schedule", "--spec", "s.json", "--emit", "json", "--out", "e.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(read(dir.path(), "e.json")["family"], "inverse_time");
}

#[test]
fn audit_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "s.json", &inverse(2.0, 100));
    let band = |m: f64, big_m: f64| json!({"lower": {"family": "power_law", "p": 1.0}, "upper": {"family": "power_law", "p": 1.0}, "m": m, "M": big_m});
    put(dir.path(), "ok.json", &band(1.0, 3.0));
    put(dir.path(), "bad.json", &band(1.0, 1.5));
    let out = exec(
        &[
            "audit",
            "--schedule",
            "s.json",
            "--band",
            "ok.json",
            "--horizon",
            "100",
            "--report",
            "r.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(read(dir.path(), "r.json")["holds"], true);
    let out = exec(
        &[
            "audit",
            "--schedule",
            "s.json",
            "--band",
            "bad.json",
            "--horizon",
            "100",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["holds"], false);
    assert_eq!(rep["violation_count"], 100);
}

#[test]
fn bound_writes_curve_and_report() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "s.json", &inverse(2.0, 1000));
    put(
        dir.path(),
        "c.json",
        &json!({"mu": 1.0, "l_f": 1.0, "sigma2": 1.0, "tau": 1.0, "dist0": 1.0}),
    );
    let out = exec(
        &[
            "bound",
            "--theorem",
            "thm1",
            "--schedule",
            "s.json",
            "--constants",
            "c.json",
            "--horizons",
            "10,100,1000",
            "--out",
            "b.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "T,bound");
    assert_eq!(lines.len(), 4);
    let rep = read(dir.path(), "b.json");
    assert_eq!(rep["theorem"], "thm1");
    assert!(rep["delta"].as_f64().unwrap() > 0.0);
    // a band the schedule cannot meet is a validation error
    let out = exec(
        &[
            "bound",
            "--theorem",
            "thm3",
            "--params",
            r#"{"c": 0.5, "M": 2.0}"#,
            "--schedule",
            "s.json",
            "--constants",
            "c.json",
            "--horizons",
            "10",
            "--out",
            "x.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_fit_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "problem": {"kind": "quadratic", "d": 1, "noise": 1.0},
        "schedules": [{"name": "inv", "family": "inverse_time", "params": {"eta0": 2.0}, "horizon": 2000}],
        "seeds": 50,
        "master_seed": 1,
        "optimizer": {"outer_loops": 2000, "x_init": [1.0]},
        "output": {"persist_trajectories": true}
    });
    put(dir.path(), "exp.json", &cfg);
    let out = exec(
        &[
            "run",
            "--config",
            "exp.json",
            "--out",
            "res",
            "--parallel",
            "2",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "series.csv",
        "series.json",
        "summary.json",
        "trajectories/inv/seed_0.csv",
    ] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }

    let out = exec(
        &[
            "fit",
            "--series",
            "res/series.csv",
            "--window",
            "20,2000",
            "--out",
            "fit.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let slope = read(dir.path(), "fit.json")["slope"].as_f64().unwrap();
    assert!((-1.3..-0.7).contains(&slope), "{slope}");

    std::fs::write(
        dir.path().join("b.csv"),
        "T,bound\n10,1.0\n100,0.1\n1000,0.01\n",
    )
    .unwrap();
    let out = exec(
        &[
            "compare",
            "--series",
            "res/series.csv",
            "--bound",
            "b.csv",
            "--report",
            "cmp.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let rep = read(dir.path(), "cmp.json");
    assert_eq!(rep["n_points"], 3);
    assert_eq!(rep["dominance"], 1.0);

    std::fs::write(dir.path().join("off.csv"), "T,bound\n5000,1.0\n").unwrap();
    let out = exec(
        &[
            "compare",
            "--series",
            "res/series.csv",
            "--bound",
            "off.csv",
            "--report",
            "c2.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exec(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(exec(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(exec(&["schedule"], dir.path()).status.code(), Some(1));
    // missing input file
    assert_eq!(
        exec(&["schedule", "--spec", "nope.json"], dir.path())
            .status
            .code(),
        Some(2)
    );
    put(dir.path(), "neg.json", &inverse(-1.0, 10));
    assert_eq!(
        exec(&["schedule", "--spec", "neg.json"], dir.path())
            .status
            .code(),
        Some(1)
    );
    let diverge = json!({
        "problem": {"kind": "quadratic", "d": 1},
        "schedules": [{"name": "hot", "family": "tabulated", "params": {"values": vec![3.0; 400]}, "horizon": 400}],
        "seeds": 2,
        "optimizer": {"outer_loops": 400, "x_init": [1.0]}
    });
    put(dir.path(), "d.json", &diverge);
    let out = exec(&["run", "--config", "d.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hot"));
}
