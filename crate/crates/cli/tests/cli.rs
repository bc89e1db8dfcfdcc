use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bellforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellforge")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = bellforge(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, parties: &str) -> std::path::PathBuf {
    let file = dir.join(format!("gen{parties}.json"));
    let out = bellforge(&["inequality", "gen", "--parties", parties, "--out", path(&file)]);
    assert!(out.status.success());
    file
}

#[test]
fn inequality_gen_files() {
    let dir = tempfile::tempdir().unwrap();
    let g3: Value = serde_json::from_str(&std::fs::read_to_string(gen(dir.path(), "3")).unwrap()).unwrap();
    assert_eq!(g3["terms"].as_array().unwrap().len(), 16);
    assert_eq!(g3["declared_bound"], 4.0);
    let g2: Value = serde_json::from_str(&std::fs::read_to_string(gen(dir.path(), "2")).unwrap()).unwrap();
    assert_eq!(g2["terms"].as_array().unwrap().len(), 4);
    assert_eq!(g2["declared_bound"], 2.0);
    assert_eq!(g2["settings_per_party"], serde_json::json!([2, 2]));
}

#[test]
fn inequality_family_and_merge() {
    let out = bellforge(&["inequality", "family", "--index", "0"]);
    assert!(out.status.success());
    let first: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(first["settings_per_party"], serde_json::json!([4, 4, 2]));
    assert_eq!(first["declared_bound"], 16.0);
    let by_signs = bellforge(&["inequality", "family", "--signs", "0,0,0"]);
    assert_eq!(by_signs.stdout, out.stdout);
    assert!(String::from_utf8_lossy(&out.stderr).contains("setting identification"));

    let dir = tempfile::tempdir().unwrap();
    let chsh = gen(dir.path(), "2");
    let map = dir.path().join("map.json");
    std::fs::write(&map, r#"{"parties": [[1, 1], [1, 2]]}"#).unwrap();
    let merged = bellforge(&["inequality", "merge", "--ineq", path(&chsh), "--map", path(&map)]);
    assert!(merged.status.success());
    let v: Value = serde_json::from_slice(&merged.stdout).unwrap();
    assert_eq!(v["settings_per_party"], serde_json::json!([1, 2]));
    assert_eq!(v["declared_bound"], 2.0);
}

#[test]
fn certify_reports() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&["certify", "--ineq", path(&gen(dir.path(), "3"))]);
    assert_eq!(r["command"], "certify");
    assert_eq!(r["outputs"]["bound"], 4.0);
    assert_eq!(r["outputs"]["rank"], 32);
    assert_eq!(r["outputs"]["tight"], true);

    let single = dir.path().join("single.json");
    std::fs::write(
        &single,
        r#"{"n_parties":3,"settings_per_party":[1,1,1],"declared_bound":1,"terms":[{"settings":[1,1,1],"coeff":"1"}]}"#,
    )
    .unwrap();
    let s = report(&["tight", "--ineq", path(&single)]);
    assert_eq!(s["outputs"]["bound"], 1.0);
    assert_eq!(s["outputs"]["tight"], true);

    let b = report(&["bound", "--ineq", path(&gen(dir.path(), "4"))]);
    assert_eq!(b["outputs"]["exact_bound"], 32);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bellforge(&["inequality", "gen", "--parties", "1"]).status.code(), Some(2));
    assert_eq!(bellforge(&["criterion", "--state", "bell:2"]).status.code(), Some(2));
    assert_eq!(bellforge(&["inequality", "family", "--index", "4096"]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(bellforge(&["criterion", "--state", path(&bad)]).status.code(), Some(2));
    assert_eq!(bellforge(&["certify", "--ineq", path(&bad)]).status.code(), Some(2));
    // 2^27 strategies exceed the enumeration limit.
    let big = dir.path().join("big.json");
    std::fs::write(
        &big,
        r#"{"n_parties":3,"settings_per_party":[9,9,9],"declared_bound":1,"terms":[{"settings":[1,1,1],"coeff":"1"}]}"#,
    )
    .unwrap();
    let out = bellforge(&["certify", "--ineq", path(&big)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2^26"));
}

#[test]
fn criterion_examples() {
    let psi = report(&["criterion", "--state", "psi4", "--mode", "multisetting", "--restarts", "8", "--json"]);
    assert!(psi["outputs"]["value"].as_f64().unwrap() >= 4.0 - 1e-6);
    assert!(psi["outputs"]["noise_threshold"].as_f64().unwrap() <= 0.5 + 1e-6);
    assert!(psi["outputs"]["frames"].is_object());

    let ghz = report(&["criterion", "--state", "ghz:3:0.7854", "--mode", "standard", "--json"]);
    assert!((ghz["outputs"]["violation_factor"].as_f64().unwrap() - 2.0).abs() < 1e-4);
    assert!((ghz["outputs"]["value"].as_f64().unwrap() - 4.0).abs() < 2e-4);

    let w = report(&["criterion", "--state", "w:3", "--json"]);
    assert!(w["outputs"]["value"].as_f64().unwrap() >= 7.0 / 3.0 - 1e-6);
}

#[test]
fn reports_are_reproducible_and_sorted() {
    let args = ["criterion", "--state", "w:4", "--mode", "wwzb", "--restarts", "4", "--seed", "11", "--json"];
    let a = bellforge(&args);
    let b = bellforge(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let keys: Vec<usize> = ["\"command\"", "\"inputs\"", "\"outputs\"", "\"seed\"", "\"tool_version\""]
        .iter()
        .map(|k| text.find(k).unwrap())
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["seed"], 11);
}

#[test]
fn threads_variable_does_not_change_output() {
    let args = ["criterion", "--state", "ghz:3:0.3", "--restarts", "6", "--json"];
    let one = Command::new(env!("CARGO_BIN_EXE_bellforge")).args(args).env("BELLFORGE_THREADS", "1").output().unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_bellforge")).args(args).env("BELLFORGE_THREADS", "3").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn quantum_max_and_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("epr.json");
    std::fs::write(
        &state,
        r#"{"n_parties":2,"kind":"pure","amplitudes":[[0,0],[0.7071067811865476,0],[0.7071067811865476,0],[0,0]]}"#,
    )
    .unwrap();
    let q = report(&["quantum-max", "--ineq", path(&gen(dir.path(), "2")), "--state", path(&state), "--restarts", "4"]);
    assert!((q["outputs"]["value"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-5);

    let out_file = dir.path().join("t.json");
    let t = report(&["tensor", "--state", path(&state), "--out", path(&out_file)]);
    let comps = t["outputs"]["components"].as_array().unwrap();
    // Identity, xx, yy, zz.
    assert_eq!(comps.len(), 4);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(out_file).unwrap()).unwrap();
    assert_eq!(&written, &t["outputs"]["components"]);
}

fn scan_rows(args: &[&str]) -> Vec<Vec<String>> {
    let out = bellforge(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("family,n_parties,alpha,multisetting"));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn scan_ghz() {
    let alphas: Vec<String> = (1..=8).map(|i| format!("{}", i as f64 * std::f64::consts::FRAC_PI_4 / 8.0)).collect();
    let rows = scan_rows(&["scan", "--family", "ghz", "--parties", "3", "--alphas", &alphas.join(","), "--modes", "multisetting,wwzb", "--restarts", "8"]);
    assert_eq!(rows.len(), 8);
    for row in rows {
        let alpha: f64 = row[2].parse().unwrap();
        let m: f64 = row[3].parse().unwrap();
        assert!(m > 1.0, "alpha {alpha}: {m}");
        assert!(row[5].is_empty());
        let w: f64 = row[7].parse().unwrap();
        if (2.0 * alpha).sin() <= 0.5 {
            assert!(w <= 1.0 + 1e-3, "alpha {alpha}: {w}");
        }
    }
}

#[test]
fn scan_w_thresholds() {
    let rows = scan_rows(&["scan", "--family", "w", "--parties", "3,4,5", "--modes", "multisetting", "--restarts", "8"]);
    for (row, n) in rows.iter().zip(3..) {
        let thr: f64 = row[4].parse().unwrap();
        assert!((thr - 1.0 / (3.0 - 2.0 / n as f64).sqrt()).abs() < 1e-6, "N={n}: {thr}");
    }
    let empty = bellforge(&["scan", "--family", "ghz", "--parties", "3"]);
    assert_eq!(empty.status.code(), Some(2));
    let grid = scan_rows(&["scan", "--family", "ghz", "--parties", "3", "--alpha-grid", "0.1:0.7:3", "--modes", "standard", "--restarts", "2"]);
    assert_eq!(grid.len(), 3);
}
