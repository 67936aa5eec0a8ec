use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use defect_resonance::cli::RunConfig;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_defect-resonance");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn invoke(sub: &str, config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args([sub, "--config"])
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("cfg.json");
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Data rows of an emitted CSV (comment and header dropped).
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn all_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn zero_potential_has_no_gaps() {
    let out = tempfile::tempdir().unwrap();
    let o = invoke("bands", &configs().join("free_bands.json"), out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.path().join("free_bands.json"));
    let intervals = report["intervals"].as_array().unwrap();
    assert!(intervals.iter().all(|i| i["kind"] == "band"), "{intervals:?}");
    for row in csv_rows(&out.path().join("free_bands.csv")) {
        assert_eq!(row[3], "false");
    }
}

#[test]
fn sweep_summary_is_consistent_with_records() {
    let out = tempfile::tempdir().unwrap();
    let cfg_path = configs().join("ref1_sweep.json");
    let o = invoke("sweep", &cfg_path, out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = RunConfig::from_json(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let hash = cfg.hash();
    let summary = read_json(&out.path().join("ref1_sweep_summary.json"));
    assert_eq!(summary["config_hash"], hash.as_str());

    let k = summary["k"].as_f64().unwrap();
    let rows = csv_rows(&out.path().join("ref1_sweep.csv"));
    assert_eq!(rows.len(), 4);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[5].parse::<f64>().unwrap().ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    let fit = &summary["fits"]["log_theta_e"];
    assert!((fit["slope"].as_f64().unwrap() - slope).abs() < 1e-12);
    assert!((slope + k).abs() < 1e-2 * k, "slope {slope} vs -k {}", -k);

    for name in ["err_vs_e", "err_vs_asymptotic", "log_d_theta_e"] {
        let f = &summary["fits"][name];
        assert!(f["slope"].as_f64().unwrap().is_finite(), "{name}: {f}");
    }
    for rec in summary["records"].as_array().unwrap() {
        assert_eq!(rec["config_hash"], hash.as_str());
    }
    for row in rows {
        assert_eq!(row.last().unwrap(), &hash);
    }
}

#[test]
fn truncation_inside_support_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "potential": {
            "periodic": {"cos": [0.0, 10.0]},
            "defect": {"shape": "smooth_bump", "amplitude": -8.0, "rho": 0.5}
          },
          "mode": "resonance",
          "M": [0.25, 6.0]
        }"#,
    );
    let o = invoke("run", &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("M[0]") && err.contains("must exceed the defect support radius"),
        "{err}"
    );
}

#[test]
fn unknown_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "potential": {"periodic": {"cos": []}, "defect": {"shape": "smooth_bump", "amplitude": 0.0, "rho": 0.5}},
          "mode": "bands",
          "tolerances": {"odee": 1e-9}
        }"#,
    );
    let o = invoke("run", &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tolerances") && err.contains("odee"), "{err}");
}

#[test]
fn edge_mode_requires_half_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "potential": {"periodic": {"cos": [0.0, 10.0]}, "defect": {"shape": "smooth_bump", "amplitude": -20.0, "rho": 0.5}},
          "mode": "edge",
          "M": 8
        }"#,
    );
    let o = invoke("run", &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("ref3_bound.json");
    for d in [&a, &b] {
        let o = invoke("run", &cfg, d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (all_files(a.path()), all_files(b.path()));
    assert_eq!(fa.len(), fb.len());
    assert!(!fa.is_empty());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert!(
            fs::read(x).unwrap() == fs::read(y).unwrap(),
            "{} differs",
            x.display()
        );
    }
}
