use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qwscatter::config::FieldConfig;
use qwscatter::corpus;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qwscatter"));
    c.env_remove("QWSCATTER_THREADS");
    c
}

fn corpus_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const HADAMARD: &str = r#"{"free": {"p": 0.7071067811865476}}"#;

#[test]
fn bundled_corpus_matches_the_library() {
    for (name, cfg) in corpus::configs() {
        let text = fs::read_to_string(corpus_file(name)).unwrap();
        let parsed = FieldConfig::from_json(&text).unwrap();
        assert_eq!(parsed, cfg, "{name}");
    }
}

#[test]
fn hadamard_band_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "h.json", HADAMARD);
    let o = run(&["bands", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut edges = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0].starts_with("band") {
            edges.push(cols[1].parse::<f64>().unwrap());
            edges.push(cols[2].parse::<f64>().unwrap());
        }
    }
    let expect = [1.0, 3.0, 5.0, 7.0].map(|k| k * FRAC_PI_4);
    assert_eq!(edges.len(), 4);
    for (g, e) in edges.iter().zip(expect) {
        assert!((g - e).abs() < 1e-15, "{g} vs {e}");
    }
}

#[test]
fn free_smatrix_rows_are_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "h.json", HADAMARD);
    let o = run(&["smatrix", "--config", cfg.to_str().unwrap(), "--steps", "25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').take(9).map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    for r in rows {
        assert_eq!(r[col("t_re")], 1.0);
        assert_eq!(r[col("t_im")], 0.0);
        assert_eq!(r[col("r_re")], 0.0);
        assert_eq!(r[col("r_im")], 0.0);
        assert_eq!(r[col("T")], 1.0);
        assert_eq!(r[col("R")], 0.0);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = corpus_file("barrier");
    let cfg = cfg.to_str().unwrap();
    let mut seen: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for (k, threads) in ["1", "2", "1"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let out_s = out.to_str().unwrap();
        for args in [
            vec!["smatrix", "--config", cfg, "--steps", "40"],
            vec!["roots", "--config", cfg, "--steps", "64"],
            vec!["bands", "--config", cfg],
            vec!["eigen", "--config", cfg, "--resolution", "200", "--ring-sites", "300"],
            vec!["simulate", "--config", cfg, "--times", "100,200"],
        ] {
            let mut a = args.clone();
            a.extend(["--out", out_s, "--threads", threads, "--seed", "7"]);
            let o = run(&a);
            assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        }
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        seen.push(files);
    }
    let names: Vec<&str> = seen[0].iter().map(|f| f.0.as_str()).collect();
    for expected in ["smatrix.csv", "smatrix.json", "roots.csv", "bands.csv", "bands.json", "bound_states.json", "probe.json"] {
        assert!(names.contains(&expected), "{names:?}");
    }
    for run in &seen[1..] {
        assert_eq!(run.len(), seen[0].len());
        for (a, b) in seen[0].iter().zip(run) {
            assert!(a == b, "{} differs between runs", a.0);
        }
    }
}

#[test]
fn probe_json_has_the_report_fields() {
    let o = run(&["simulate", "--config", corpus_file("one-defect").to_str().unwrap(), "--times", "200,400"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["theta0", "sigma", "T_measured", "R_measured", "T_predicted", "R_predicted", "cauchy_defects"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let d = v["T_measured"].as_f64().unwrap() - v["T_predicted"].as_f64().unwrap();
    assert!(d.abs() <= 2e-2);
    assert_eq!(v["cauchy_defects"].as_array().unwrap().len(), 1);
}

#[test]
fn config_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("schema.json", "{\n  \"free\": {\"p\": 0.7},\n  \"defects\": [{\"x\": \"one\"}]\n}", "error[config]", "line 3"),
        (
            "small.json",
            r#"{"free": {"p": 0.7}, "delta": 0.05, "defects": [{"x": -4, "coin": {"p": 0.01}}]}"#,
            "error[amplitude-bound]",
            "site -4",
        ),
        (
            "unitary.json",
            r#"{"free": {"p": 0.7}, "defects": [{"x": 2, "matrix": [[0.6, 0], [0.8, 0], [0.8, 0], [-0.600001, 0]]}]}"#,
            "error[not-unitary]",
            "site 2",
        ),
    ];
    for (name, text, code, detail) in cases {
        let cfg = write_config(dir.path(), name, text);
        let o = run(&["bands", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let err = stderr(&o);
        assert!(err.starts_with(code) && err.contains(detail), "{name}: {err}");
    }
    let o = run(&["bands", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn usage_errors() {
    let o = run(&["smatrix"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));
    let cfg = corpus_file("one-defect");
    let o = run(&["roots", "--config", cfg.to_str().unwrap(), "--theta-min", "3", "--theta-max", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["bands", "--config", cfg.to_str().unwrap()]).env("QWSCATTER_THREADS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--threads"));
}

#[test]
fn computation_errors_carry_codes() {
    // a packet that cannot fit in a tiny ring
    let cfg = corpus_file("one-defect");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--ring-sites", "64"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[window]"), "{}", stderr(&o));
}

#[test]
fn validate_bundled_corpus_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--out", dir.path().to_str().unwrap()]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}\n{}", stderr(&o));
    assert!(text.contains(" checks, 0 failed"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("validate.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    for module in ["walk", "dispersion", "green", "stationary", "smatrix", "timedomain"] {
        assert!(checks.iter().any(|c| c["module"] == module), "{module}");
    }
    assert!(checks.iter().all(|c| c["measured"].is_number() && c["pass"] == true));
    assert_eq!(report["fields"].as_array().unwrap().len(), 5);
}
