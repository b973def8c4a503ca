mod common;

use common::{run, write, SMALL_CAMPAIGN, SMALL_SIMULATE};
use serde_json::Value;
use std::fs;

fn manifest(dir: &std::path::Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn wke_without_nonlinearity_reproduces_linear_law() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "wke.toml",
        "[params]\neps = 0.0\nhorizon = 1.0\n[wke]\ntau_end = 0.5\nsteady = true\n",
    );
    let out = tmp.path().join("out");
    let o = run("wke", &cfg, &out, &["--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    let mut n = 0;
    for r in rd.records() {
        let r = r.unwrap();
        let m: f64 = r[2].parse().unwrap();
        let n0: f64 = r[3].parse().unwrap();
        assert!((m - n0).abs() < 1e-8, "{m} vs {n0}");
        n += 1;
    }
    assert_eq!(n, 21 * 76);
    let mut rd = csv::Reader::from_path(out.join("steady.csv")).unwrap();
    for r in rd.records() {
        let r = r.unwrap();
        let rho: f64 = r[0].parse().unwrap();
        let m: f64 = r[1].parse().unwrap();
        let p = quasikin::Profiles::default();
        let y = rho * rho;
        assert_eq!(m, p.b(y).powi(2) / p.gamma(y));
    }
}

#[test]
fn manifest_checksums_and_config_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "k.toml", "[grid]\nnodes = 9\ndr = 0.5\nsupport = 4.0\n");
    let out = tmp.path().join("out");
    let o = run("kinetic", &cfg, &out, &["--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let arts = m["artifacts"].as_array().unwrap();
    assert_eq!(arts.len(), 1);
    let bytes = fs::read(out.join(arts[0]["path"].as_str().unwrap())).unwrap();
    use sha2::Digest;
    let hex: String = sha2::Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(arts[0]["sha256"].as_str().unwrap(), hex);
    // the snapshot re-runs to the same bytes
    let snap = write(tmp.path(), "snap.toml", m["config"].as_str().unwrap());
    let out2 = tmp.path().join("out2");
    let o = run("kinetic", &snap, &out2, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(bytes, fs::read(out2.join("kinetic.csv")).unwrap());
}

#[test]
fn orphan_files_fail_the_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "k.toml", "[grid]\nnodes = 5\ndr = 0.5\nsupport = 2.0\n");
    let out = tmp.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("stray.csv"), "x\n").unwrap();
    let o = run("kinetic", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = write(tmp.path(), "bad.toml", "[params]\nnu = 3.0\n");
    assert_eq!(run("wke", &bad, &out, &[]).status.code(), Some(2));
    let wrong_mode = write(tmp.path(), "m.toml", "mode = \"wick\"\n");
    assert_eq!(run("wke", &wrong_mode, &out, &[]).status.code(), Some(2));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(run("wke", &missing, &out, &[]).status.code(), Some(5));
    let reg = write(
        tmp.path(),
        "reg.toml",
        "[verify]\nchecks = [\"main_theorem\"]\n[verify.main_theorem]\nperiod = 10.0\n[verify.n2_table]\nnodes = 3\ndr = 0.5\ntaus = [-1.0, 0.0]\nrule = { reach = 4.0, r_panel = 1.0, r_nodes = 6, angles = 12, q_panel = 1.0, q_nodes = 6, w_nodes = 8, w_first = 0.25, p_cap = 0.75 }\n",
    );
    assert_eq!(run("verify", &reg, &tmp.path().join("v"), &[]).status.code(), Some(3));
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL_SIMULATE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("simulate", &cfg, &a, &["--threads", "1"]).status.success());
    assert!(run("simulate", &cfg, &b, &["--threads", "3"]).status.success());
    assert_eq!(fs::read(a.join("spectrum.csv")).unwrap(), fs::read(b.join("spectrum.csv")).unwrap());
    let c = tmp.path().join("c");
    assert!(run("simulate", &cfg, &c, &["--seed", "6"]).status.success());
    assert_ne!(fs::read(a.join("spectrum.csv")).unwrap(), fs::read(c.join("spectrum.csv")).unwrap());
}

#[test]
fn spectrum_export_is_sorted_by_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL_SIMULATE);
    let out = tmp.path().join("out");
    assert!(run("simulate", &cfg, &out, &[]).status.success());
    let o = common::bin()
        .args(["export", "--selector", "spectrum", "--record"])
        .arg(out.join("manifest.json"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(out.join("export/plot_spectrum.csv")).unwrap();
    let xs: Vec<f64> = rd.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert!(!xs.is_empty());
    assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    let empty = common::bin()
        .args(["export", "--record"])
        .arg(out.join("manifest.json"))
        .output()
        .unwrap();
    assert_eq!(empty.status.code(), Some(2));
    let missing = common::bin()
        .args(["export", "--selector", "error", "--record"])
        .arg(out.join("manifest.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(5));
}

#[test]
fn small_campaign_reports_every_section() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "v.toml", SMALL_CAMPAIGN);
    let out = tmp.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 4, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, quasikin::verification::ALL_CHECKS.to_vec());
    for r in report["records"].as_array().unwrap() {
        assert!(!r["provenance"].as_array().unwrap().is_empty());
        let name = r["name"].as_str().unwrap();
        assert!(out.join(format!("check_{name}.csv")).exists());
    }
    assert_eq!(report["environment"]["seed"], 11);
    // the log-log slope column recomputes the fitted exponent
    let o = common::bin()
        .args(["export", "--selector", "rate:theorem_a", "--record"])
        .arg(out.join("manifest.json"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fitted = report["records"][3]["rates"][0]["fitted"].as_f64().unwrap();
    let mut rd = csv::Reader::from_path(out.join("export/plot_rate_theorem_a.csv")).unwrap();
    for r in rd.records() {
        let slope: f64 = r.unwrap()[3].parse().unwrap();
        assert!((slope - fitted).abs() < 1e-12, "{slope} vs {fitted}");
    }
    let o = common::bin()
        .args(["export", "--selector", "error", "--record"])
        .arg(out.join("manifest.json"))
        .output()
        .unwrap();
    assert!(o.status.success());
}
