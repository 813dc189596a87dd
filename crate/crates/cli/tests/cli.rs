use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsim")).args(args).output().expect("spawn qsim")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bell_run_writes_correlated_pairs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bell.json", r#"{"schema": 1, "scenario": "bell"}"#);
    let out = dir.path().join("out");
    let o = qsim(&["run", s(&cfg), "--out", s(&out), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "results.json", "metadata.json", "plotdata_population.csv", "hist_000.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let r = read_json(&out.join("results.json"));
    assert_eq!(r["points"].as_array().unwrap().len(), 12);
    let near = &r["analysis"]["bell"]["nearest_reference"];
    let p = |k: &str| near[k].as_f64().unwrap();
    assert!((0.4..=0.6).contains(&p("p00")) && (0.4..=0.6).contains(&p("p11")));
    assert!(p("p01") + p("p10") <= 0.05);
}

#[test]
fn fit_rejects_empty_and_malformed_tables() {
    let dir = TempDir::new().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let header_only = write(dir.path(), "header.csv", "t,p,sigma\n");
    let junk = write(dir.path(), "junk.csv", "t,p,sigma\n0.1,abc,0.1\n");
    for f in [&empty, &header_only, &junk] {
        let o = qsim(&["fit", s(f), "--out", s(&dir.path().join("fit"))]);
        assert_eq!(o.status.code(), Some(2), "{}", f.display());
    }
}

#[test]
fn fit_recovers_a_clean_oscillation() {
    let dir = TempDir::new().unwrap();
    let omega = 1.8 * std::f64::consts::TAU;
    let mut body = String::from("t,p,sigma\n");
    for k in 0..80 {
        let t = 0.05 * k as f64;
        let p = 0.5 - 0.45 * (omega * t).cos() * (-t / 3.0).exp();
        body += &format!("{t},{p},0.01\n");
    }
    let csv = write(dir.path(), "data.csv", &body);
    let out = dir.path().join("fit");
    let o = qsim(&["fit", s(&csv), "--model", "damped-sine", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("fit.json"));
    assert!((r["omega_mhz"].as_f64().unwrap() - 1.8).abs() < 1e-6);
    assert!((r["tau_us"].as_f64().unwrap() - 3.0).abs() < 1e-6);
    let rows = fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert_eq!(rows.lines().count(), 81);
}

#[test]
fn target_longer_than_register_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "z2.json",
        r#"{"schema": 1, "scenario": "z2chain", "target": "10100010101"}"#,
    );
    for cmd in ["run", "validate", "optimize"] {
        let o = qsim(&[cmd, s(&cfg), "--out", s(&dir.path().join("o"))][..if cmd == "validate" { 2 } else { 4 }]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
    }
}

#[test]
fn seeded_runs_are_reproducible_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "rabi.json", r#"{"schema": 1, "scenario": "rabi", "shots": 500, "seed": 11}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(qsim(&["run", s(&cfg), "--out", s(&a), "--jobs", "1"]).status.success());
    assert!(qsim(&["run", s(&cfg), "--out", s(&b), "--jobs", "3"]).status.success());
    // results differ only in the recorded output directory
    let results = |d: &Path| {
        let mut r = read_json(&d.join("results.json"));
        r["config"].as_object_mut().unwrap().remove("output");
        r
    };
    assert!(results(&a) == results(&b));
    assert!(fs::read(a.join("hist_017.json")).unwrap() == fs::read(b.join("hist_017.json")).unwrap());

    let c = dir.path().join("c");
    assert!(qsim(&["run", s(&cfg), "--out", s(&c), "--seed", "12"]).status.success());
    assert!(results(&a)["points"] != results(&c)["points"]);
}

#[test]
fn mitigation_leaves_raw_outputs_untouched() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bell.json", r#"{"schema": 1, "scenario": "bell", "shots": 2000, "seed": 5}"#);
    let plain = dir.path().join("plain");
    let mitigated = dir.path().join("mitigated");
    assert!(qsim(&["run", s(&cfg), "--out", s(&plain)]).status.success());
    assert!(qsim(&["run", s(&cfg), "--out", s(&mitigated), "--mitigate=0.05"]).status.success());
    for k in 0..12 {
        let name = format!("hist_{k:03}.json");
        assert_eq!(fs::read(plain.join(&name)).unwrap(), fs::read(mitigated.join(&name)).unwrap());
        assert!(mitigated.join(format!("hist_{k:03}_mitigated.json")).exists());
    }
    let a = read_json(&plain.join("results.json"));
    let b = read_json(&mitigated.join("results.json"));
    for (p, q) in a["points"].as_array().unwrap().iter().zip(b["points"].as_array().unwrap()) {
        assert_eq!(p["raw"], q["raw"]);
        assert!(p["mitigated"].is_null() && !q["mitigated"].is_null());
    }
}

#[test]
fn validate_reports_violations() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "good.json", r#"{"schema": 1, "scenario": "misloop"}"#);
    let o = qsim(&["validate", s(&good)]);
    assert!(o.status.success());
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["ok"], Value::Bool(true));

    write(dir.path(), "close.json", r#"{"atoms": [[0, 0], [1, 0]]}"#);
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"schema": 1, "scenario": "custom", "register": {"file": "close.json"},
            "schedule": {"trapezoid": {"omega_mhz": 9.0, "ramp_us": 0.1, "total_us": 1.0}}}"#,
    );
    let o = qsim(&["validate", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["ok"], Value::Bool(false));
    assert!(report["violations"].as_array().unwrap().len() >= 2);
    assert_eq!(qsim(&["run", s(&bad), "--out", s(&dir.path().join("o"))]).status.code(), Some(2));
}

#[test]
fn unknown_fields_and_conflicting_flags_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "x.json", r#"{"schema": 1, "scenario": "bell", "shotz": 10}"#);
    assert_eq!(qsim(&["validate", s(&cfg)]).status.code(), Some(2));
    let cfg = write(dir.path(), "y.json", r#"{"schema": 1, "scenario": "bell"}"#);
    assert_eq!(qsim(&["run", s(&cfg), "--exact", "--shots", "10"]).status.code(), Some(2));
    assert_eq!(qsim(&["run", s(&dir.path().join("missing.json"))]).status.code(), Some(4));
}

#[test]
fn short_optimization_writes_a_replayable_schedule() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("opt");
    let cfg = write(
        dir.path(),
        "z2.json",
        &format!(
            r#"{{"schema": 1, "scenario": "z2chain", "optimizer": {{"max_evaluations": 4}}, "output": {:?}}}"#,
            out.to_str().unwrap()
        ),
    );
    let o = qsim(&["optimize", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("results.json"));
    assert_eq!(r["trace"].as_array().unwrap().len(), 4);
    let best = r["optimized"]["target_probability"].as_f64().unwrap();
    let linear = r["linear"]["target_probability"].as_f64().unwrap();
    assert!(best >= linear - 1e-12);
    for f in ["schedule.json", "program.json", "plotdata_drive.csv", "plotdata_trace.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    // the recorded schedule replays to the recorded probability
    let replay = write(
        dir.path(),
        "replay.json",
        &format!(
            r#"{{"schema": 1, "scenario": "z2chain", "schedule": {{"optimized": {:?}}}}}"#,
            out.join("results.json").to_str().unwrap()
        ),
    );
    let out2 = dir.path().join("replay");
    assert!(qsim(&["run", s(&replay), "--out", s(&out2)]).status.success());
    let r2 = read_json(&out2.join("results.json"));
    let p = r2["points"][0]["raw"]["target_probability"].as_f64().unwrap();
    assert!((p - best).abs() < 1e-9, "{p} vs {best}");
}
