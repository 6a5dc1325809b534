use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use magweyl::container::{operator_file_len, read_symbol, symbol_file_len};
use magweyl::verify::Config;
use serde_json::Value;

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.json")
}

fn magweyl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magweyl")).args(args).env("MAGWEYL_THREADS", "1").output().unwrap()
}

fn run_suite(config: &Path, suite: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--suite", suite, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    magweyl(&args)
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(default_config()).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn roundtrip_suite_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite(&default_config(), "roundtrip", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "roundtrip");
    assert_eq!(report["prng"], "ChaCha8Rng");
    assert_eq!(report["seed"], 20240611);
    assert_eq!(report["pass"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert!(c["name"].as_str().unwrap().starts_with("roundtrip."));
        assert!(c["defect"].as_f64().unwrap() <= c["tolerance"].as_f64().unwrap());
    }
}

#[test]
fn reports_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(run_suite(&default_config(), "gauge", d.path(), &[]).status.code(), Some(0));
    }
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn missing_output_directory_is_a_schema_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite(&default_config(), "roundtrip", &dir.path().join("absent"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_field_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["grid"].as_object_mut().unwrap().remove("n");
    });
    let out = run_suite(&cfg, "roundtrip", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["params"]["temperature"] = Value::from(1.0);
    });
    assert_eq!(run_suite(&cfg, "roundtrip", dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn impossible_tolerance_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite(&default_config(), "roundtrip", dir.path(), &["--tol", "1e-20"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn expansion_table_shows_the_truncation_orders() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_suite(&default_config(), "expansion", dir.path(), &[]).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("expansion.csv")).unwrap();
    let mut lines = csv.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (ni, oi) = (head.iter().position(|h| *h == "N").unwrap(), head.iter().position(|h| *h == "order").unwrap());
    let mut seen = 0;
    for l in lines {
        let cols: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((cols[oi] - (cols[ni] + 1.0)).abs() < 0.1, "{l}");
        seen += 1;
    }
    assert!(seen > 0);
}

#[test]
fn exported_symbol_reads_back_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("symbol.mgwl");
    let out = magweyl(&["export", "--config", default_config().to_str().unwrap(), "--object", "symbol", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = Config::load(&default_config()).unwrap();
    let expected = cfg.build_symbol(0).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), symbol_file_len(1, cfg.grid.n, expected.n_out, expected.n_in));
    let back = read_symbol(&mut bytes.as_slice(), cfg.params.eps).unwrap();
    assert_eq!(back, expected);
}

#[test]
fn exported_operator_has_the_container_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("operator.mgwl");
    let out = magweyl(&["export", "--config", default_config().to_str().unwrap(), "--object", "operator", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, operator_file_len(1, 128, 1, 1));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..9], b"MGWLOPMAT");
}

#[test]
fn export_into_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent/symbol.mgwl");
    let out = magweyl(&["export", "--config", default_config().to_str().unwrap(), "--object", "symbol", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
