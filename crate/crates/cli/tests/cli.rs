//! End-to-end runs of the `dqlm` binary: exit codes, artifacts, determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha1::{Digest, Sha1};
use tempfile::TempDir;

fn dqlm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqlm")).current_dir(dir).env_remove("DQLM_OUTPUT_DIR").args(args).output().expect("binary runs")
}

/// Runs in a fresh directory with outputs under `out/`; returns the directory.
fn run_ok(args: &[&str]) -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let mut full = args.to_vec();
    full.extend(["--output-dir", "out"]);
    let o = dqlm(tmp.path(), &full);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    (tmp, out)
}

/// The single JSON error object on stderr, checked against the exit code.
fn error_of(o: &Output, code: i32) -> Value {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    let v: Value = serde_json::from_str(text.trim()).expect("stderr is one JSON object");
    assert_eq!(v["error"]["exit_code"], code);
    assert!(v["error"]["kind"].is_string() && v["error"]["message"].is_string());
    v
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn git_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h.split(" [").next() == Some(name)).unwrap_or_else(|| panic!("no column {name}"))
}

fn csv_files(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<_> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "csv")).collect();
    v.sort();
    v
}

#[test]
fn unknown_flag_exits_2() {
    let tmp = TempDir::new().unwrap();
    let v = error_of(&dqlm(tmp.path(), &["spectrum", "--bogus", "1"]), 2);
    assert_eq!(v["error"]["kind"], "usage");
    error_of(&dqlm(tmp.path(), &["no-such-task"]), 2);
}

#[test]
fn unknown_config_key_exits_2_before_any_output() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"task": "profile", "L": 6, "gama_u": 3}"#).unwrap();
    let v = error_of(&dqlm(tmp.path(), &["run", "-c", "c.json", "--output-dir", "out"]), 2);
    assert!(v["error"]["message"].as_str().unwrap().contains("gama_u"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn malformed_values_exit_2() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"task": "spectrum", "L": "seven"}"#).unwrap();
    error_of(&dqlm(tmp.path(), &["run", "-c", "c.json"]), 2);
    fs::write(tmp.path().join("n.json"), r#"{"L": 4}"#).unwrap();
    error_of(&dqlm(tmp.path(), &["run", "-c", "n.json"]), 2);
    error_of(&dqlm(tmp.path(), &["spectrum", "--L", "1"]), 2);
    error_of(&dqlm(tmp.path(), &["dynamics", "--L", "4", "--N", "1", "--initial-sites", "1,2"]), 2);
    error_of(&dqlm(tmp.path(), &["steady-state", "--L", "4", "--gamma-u", "-1"]), 2);
}

#[test]
fn empty_sector_exits_3() {
    let tmp = TempDir::new().unwrap();
    let v = error_of(&dqlm(tmp.path(), &["profile", "--layout", "hierarchical", "--L", "4", "--sector", "0,0"]), 3);
    assert_eq!(v["error"]["kind"], "empty-sector");
}

#[test]
fn oversized_sector_exits_4_without_diagonalizing() {
    let tmp = TempDir::new().unwrap();
    let v = error_of(&dqlm(tmp.path(), &["spectrum", "--L", "5", "--dense-cap", "600"]), 4);
    assert_eq!(v["error"]["kind"], "dense-cap");
    // OBC fits under the cap but PBC does not, so nothing may be written
    assert!(!tmp.path().join("out").exists() || csv_files(&tmp.path().join("out")).is_empty());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"task": "steady-state", "L": 4, "boundary": "obc", "gamma_u": 3, "gamma_d": 1, "output_dir": "file"}"#)
        .unwrap();
    let o = dqlm(tmp.path(), &["run", "-c", "c.json", "--gamma-d", "2", "--output-dir", "flag"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("file").exists());
    let m = manifest(&tmp.path().join("flag"));
    assert_eq!(m["task"], "steady-state");
    assert_eq!(m["config"]["L"], 4);
    assert_eq!(m["config"]["gamma_u"], 3.0);
    assert_eq!(m["config"]["gamma_d"], 2.0);
}

#[test]
fn output_dir_env_sits_between_file_and_flags() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"task": "profile", "L": 6, "output_dir": "file"}"#).unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["run", "-c", "c.json"];
        args.extend(extra);
        let o = Command::new(env!("CARGO_BIN_EXE_dqlm")).current_dir(tmp.path()).env("DQLM_OUTPUT_DIR", "env").args(&args).output().unwrap();
        assert!(o.status.success());
    };
    run(&[]);
    assert!(tmp.path().join("env/manifest.json").exists() && !tmp.path().join("file").exists());
    run(&["--output-dir", "flag"]);
    assert!(tmp.path().join("flag/manifest.json").exists());
}

#[test]
fn manifest_records_config_hashes_and_timings() {
    let (_tmp, out) = run_ok(&["spectrum", "--L", "4"]);
    let m = manifest(&out);
    assert_eq!(m["tool"], "dqlm");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["boundary"], "both");
    assert_eq!(m["config"]["N"], 2);
    assert_eq!(m["config_hash"], git_hash(m["config"].to_string().as_bytes()));
    assert!(m["timings"]["total_s"].as_f64().unwrap() >= 0.0);
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for rec in outputs {
        let bytes = fs::read(out.join(rec["file"].as_str().unwrap())).unwrap();
        assert_eq!(rec["sha1"], git_hash(&bytes));
        assert_eq!(rec["bytes"], bytes.len());
    }
    for tag in ["obc", "pbc"] {
        let d = &m["diagnostics"][tag];
        assert!(d["max_re_lambda"].as_f64().unwrap() < 1e-9);
        assert_eq!(d["kernel_count"], 1);
    }
    assert!(m["diagnostics"]["obc_hull_excess_over_pbc"].as_f64().unwrap() < 1e-6);
}

#[test]
fn every_csv_header_names_units_and_floats_carry_17_digits() {
    let runs: [&[&str]; 5] = [
        &["spectrum", "--L", "4"],
        &["steady-state", "--L", "4"],
        &["dynamics", "--L", "4", "--t-final", "2", "--t-points", "3"],
        &["winding", "--L", "4", "--phi-steps", "2"],
        &["profile", "--L", "8"],
    ];
    for args in runs {
        let (_tmp, out) = run_ok(args);
        let files = csv_files(&out);
        assert!(!files.is_empty());
        for f in files {
            let (header, rows) = csv_rows(&f);
            for h in &header {
                assert!(h.ends_with(']') && h.contains(" ["), "{}: column {h:?} lacks a unit", f.display());
            }
            for row in &rows {
                assert_eq!(row.len(), header.len());
                for cell in row.iter().filter(|c| c.contains('e') && c.parse::<f64>().is_ok()) {
                    let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
                    assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
                }
            }
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let runs: [&[&str]; 4] = [
        &["spectrum", "--L", "4"],
        &["dynamics", "--L", "4", "--t-final", "5", "--t-points", "6"],
        &["verify-exact", "--L", "4"],
        &["steady-state", "--L", "4", "--disorder-seed", "7", "--W", "0.5", "--boundary", "obc"],
    ];
    for args in runs {
        let (_a, first) = run_ok(args);
        let (_b, second) = run_ok(args);
        let files = csv_files(&first);
        assert_eq!(files.len(), csv_files(&second).len());
        for f in files {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(&f).unwrap(), fs::read(second.join(name)).unwrap(), "{args:?}: {name:?} differs");
        }
        assert_eq!(manifest(&first)["config_hash"], manifest(&second)["config_hash"]);
    }
}

#[test]
fn verify_exact_passes_every_check_at_l5() {
    let (_tmp, out) = run_ok(&["verify-exact", "--L", "5"]);
    let (header, rows) = csv_rows(&out.join("verify_exact.csv"));
    let pass = column(&header, "pass");
    let (res, tol) = (column(&header, "residual"), column(&header, "tolerance"));
    assert!(rows.len() >= 40);
    for r in &rows {
        assert_eq!(r[pass], "true", "{r:?}");
        assert!(r[res].parse::<f64>().unwrap() <= r[tol].parse::<f64>().unwrap());
    }
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    for needed in ["steady-state", "steady-state+disorder", "steady-state+gauge-fixing"] {
        assert!(labels.contains(&needed), "missing {needed}");
    }
    for layout in ["hierarchical", "square"] {
        assert!(rows.iter().any(|r| r[1].starts_with(layout)), "no {layout} rows");
    }
}

#[test]
fn steady_state_matches_the_exact_profile() {
    let (_tmp, out) = run_ok(&["steady-state", "--L", "5", "--gamma-u", "3", "--gamma-d", "1"]);
    let (header, rows) = csv_rows(&out.join("steady_state_obc.csv"));
    let (ed, exact) = (column(&header, "value_ed"), column(&header, "value_exact"));
    // tau^z per site, s^z per link, occupation per site
    assert_eq!(rows.len(), 5 + 4 + 5);
    for r in &rows {
        let (a, b): (f64, f64) = (r[ed].parse().unwrap(), r[exact].parse().unwrap());
        assert!((a - b).abs() < 1e-9, "{r:?}");
    }
    let fidelity = manifest(&out)["diagnostics"]["obc"]["states"][0]["fidelity_exact"].as_f64().unwrap();
    assert!(fidelity > 1.0 - 1e-10);
}

#[test]
fn obc_relaxation_skews_toward_the_favoured_edge() {
    let (_tmp, out) = run_ok(&["dynamics", "--L", "5", "--boundary", "obc", "--t-final", "150", "--t-points", "4"]);
    let (header, rows) = csv_rows(&out.join("dynamics_obc.csv"));
    assert_eq!(rows.len(), 4);
    let last = rows.last().unwrap();
    let n: Vec<f64> = (1..=5).map(|k| last[column(&header, &format!("N_{k}"))].parse().unwrap()).collect();
    assert!((n.iter().sum::<f64>() - 2.0).abs() < 1e-8);
    assert!(n.windows(2).all(|w| w[0] < w[1]), "{n:?}");
    assert!(manifest(&out)["diagnostics"]["obc"]["final_deviation_from_steady"].as_f64().unwrap() < 1e-6);
}

#[test]
fn flux_scan_is_periodic_and_invariant_under_pi() {
    let (_tmp, out) = run_ok(&["winding", "--L", "4", "--phi-steps", "4"]);
    let first = fs::read(out.join("winding_phi_000.csv")).unwrap();
    assert_eq!(first, fs::read(out.join("winding_phi_004.csv")).unwrap());
    let m = manifest(&out);
    assert!(m["diagnostics"]["phi_0_vs_pi"]["hausdorff"].as_f64().unwrap() < 1e-8);
    assert!(m["diagnostics"]["max_distance_to_first"].as_f64().unwrap() > 1e-3);
}

#[test]
fn chain_profile_example_fills_the_requested_sectors() {
    let (_tmp, out) = run_ok(&["profile", "--layout", "chain", "--L", "24", "--beta", "3", "--fillings", "0.25,0.5,0.75"]);
    let (header, rows) = csv_rows(&out.join("profile.csv"));
    let (nc, layer, value) = (column(&header, "N"), column(&header, "layer"), column(&header, "value"));
    for n in [6, 12, 18] {
        let sites: Vec<f64> = rows.iter().filter(|r| r[nc] == n.to_string() && r[layer] == "site").map(|r| r[value].parse().unwrap()).collect();
        assert_eq!(sites.len(), 24);
        // values are tau^z, so they sum to N - L/2
        assert!((sites.iter().sum::<f64>() - (n as f64 - 12.0)).abs() < 1e-9);
        assert!(sites.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let links: Vec<f64> = rows.iter().filter(|r| r[nc] == n.to_string() && r[layer] == "link").map(|r| r[value].parse().unwrap()).collect();
        assert_eq!(links.len(), 23);
        assert!(links.iter().all(|s| (s - 0.25).abs() < 1e-9), "{links:?}");
    }
    assert!(out.join("moments.csv").exists());
}

#[test]
fn hierarchical_profile_example_runs_in_the_neutral_sector() {
    let (_tmp, out) = run_ok(&["profile", "--layout", "hierarchical", "--L", "14", "--beta", "3", "--sector", "0,0"]);
    let (header, rows) = csv_rows(&out.join("profile.csv"));
    let (layer, value) = (column(&header, "layer"), column(&header, "value"));
    let top: Vec<f64> = rows.iter().filter(|r| r[layer] == "top").map(|r| r[value].parse().unwrap()).collect();
    assert_eq!(top.len(), 14);
    assert!(top.iter().all(|v| v.is_finite() && v.abs() <= 0.5 + 1e-12));
    let (mh, mrows) = csv_rows(&out.join("moments.csv"));
    assert!(mrows.iter().all(|r| r[column(&mh, "quadrupole")].parse::<f64>().unwrap().is_finite()));
}
