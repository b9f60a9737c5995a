use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ips(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ips"));
    c.current_dir(dir).args(args).env_remove("IPS_SEED");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn manifest(path: &Path) -> Value {
    let mut m = path.as_os_str().to_owned();
    m.push(".manifest.json");
    serde_json::from_slice(&std::fs::read(m).unwrap()).unwrap()
}

#[test]
fn csv_has_header_and_manifest_line() {
    let d = tempfile::tempdir().unwrap();
    let out = ips(d.path(), &["couple", "--coupling", "ann-coal", "--runs", "5", "--seed", "3"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("couple.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "coupling,runs,events,violations");
    let last = lines.last().unwrap();
    assert!(last.starts_with("# manifest: couple.csv.manifest.json config_sha256="));
    let m = manifest(&d.path().join("couple.csv"));
    assert_eq!(m["seed"], 3);
    assert!(last.ends_with(m["config_sha256"].as_str().unwrap()));
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_file_flags_and_env_precedence() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("run.toml"),
        "command = \"percolation\"\nseed = 11\np = \"0.6\"\nn = 10\nreplicas = 20\n",
    )
    .unwrap();
    let a = ips(d.path(), &["percolation", "--config", "run.toml", "--out", "a.csv"], &[]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let ma = manifest(&d.path().join("a.csv"));
    assert_eq!(ma["seed"], 11);
    assert_eq!(ma["config"]["params"]["n"], 10);

    let b = ips(d.path(), &["percolation", "--config", "run.toml", "--n", "12", "--out", "b.csv"], &[("IPS_SEED", "5")]);
    assert_eq!(b.status.code(), Some(0));
    let mb = manifest(&d.path().join("b.csv"));
    assert_eq!(mb["seed"], 5);
    assert_eq!(mb["config"]["params"]["n"], 12);

    let c = ips(d.path(), &["percolation", "--config", "run.toml", "--seed", "9", "--out", "c.csv"], &[("IPS_SEED", "5")]);
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(manifest(&d.path().join("c.csv"))["seed"], 9);

    // JSON configs work the same way.
    std::fs::write(d.path().join("run.json"), r#"{"seed": 11, "p": "0.6", "n": 10, "replicas": 20}"#).unwrap();
    let j = ips(d.path(), &["percolation", "--config", "run.json", "--out", "json/a.csv"], &[]);
    assert_eq!(j.status.code(), Some(0));
    assert_eq!(
        std::fs::read(d.path().join("a.csv")).unwrap(),
        std::fs::read(d.path().join("json/a.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_two_with_json() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        vec!["simulate", "--lamda", "2"],
        vec!["simulate", "--model", "nope"],
        vec!["duality-check", "--pair", "contact:self", "--q", "-1"],
        vec!["meanfield", "--family", "ising", "--bifurcation", "3:1:0.1"],
        vec!["kdep", "--p", "0.5", "--K", "3"],
    ] {
        let out = ips(d.path(), &args, &[]);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).expect("JSON error report");
        assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    std::fs::write(d.path().join("bad.toml"), "lambda = 1.0\nbogus = 2\n").unwrap();
    let out = ips(d.path(), &["simulate", "--config", "bad.toml"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = ips(d.path(), &["simulate"], &[("IPS_SEED", "x")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ising_bifurcation_shape() {
    let d = tempfile::tempdir().unwrap();
    let out = ips(d.path(), &["meanfield", "--family", "ising", "--beta", "3", "--bifurcation", "0:6:0.05"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("meanfield.csv")).unwrap();
    let mut rows: std::collections::BTreeMap<String, Vec<(f64, String)>> = Default::default();
    for line in csv.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split(',').collect();
        rows.entry(f[0].to_string()).or_default().push((f[1].parse().unwrap(), f[2].to_string()));
    }
    assert_eq!(rows.len(), 121);
    for (beta, fps) in &rows {
        let beta: f64 = beta.parse().unwrap();
        if beta < 1.99 {
            assert_eq!(fps.len(), 1, "beta {beta}");
            assert_eq!(fps[0].1, "stable");
        } else if beta > 2.01 {
            assert_eq!(fps.len(), 3, "beta {beta}");
            assert_eq!(fps.iter().filter(|f| f.1 == "stable").count(), 2);
        }
    }
    let at3 = &rows["3"];
    assert!((at3[2].0 - 0.8586).abs() < 1e-4);
}

#[test]
fn duality_runs_report_pass() {
    let d = tempfile::tempdir().unwrap();
    let out = ips(
        d.path(),
        &["duality-check", "--pair", "contact:self", "--q", "0", "--sites", "20", "--T", "5", "--seeds", "200"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("duality-check.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",200,200"));
}

#[test]
fn simulate_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = ips(
        d.path(),
        &["simulate", "--model", "ising", "--beta", "1.2", "--L", "8", "--T", "4", "--replicas", "2", "--out", "m.csv"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("m.csv")).unwrap();
    assert!(csv.starts_with("beta,L,m_hat,onsager_value\n"));
    let out = ips(
        d.path(),
        &["simulate", "--model", "coop_death", "--b", "4", "--d", "2", "--L", "6", "--T", "1", "--replicas", "4", "--times", "0:1:0.5", "--out", "c.csv"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.path().join("c.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "0,1,0");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn atomic_write_leaves_no_temp_files() {
    let d = tempfile::tempdir().unwrap();
    let out = ips(d.path(), &["percolation", "--p", "0.7", "--dump-side", "5", "--out", "sub/field.csv"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = std::fs::read_dir(d.path().join("sub"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let mut names = names;
    names.sort();
    assert_eq!(names, ["field.csv", "field.csv.manifest.json"]);
}
