use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrfit")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Non-zero exit with exactly one `error:` line on stderr.
fn assert_one_line_failure(o: &Output) -> String {
    assert!(!o.status.success(), "expected failure, stdout: {}", stdout(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn toml_file(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--output", name, "--quiet"];
    args.extend(extra);
    let o = lrfit(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
}

const THREE_ROWS: &str = "p_rx,d,p_tx,h,f,p_lr\n-110,1000,30,10,30,-100\n-90,2000,30,20,30,-85\n-125,3000,30,30,30,-120\n";

#[test]
fn filter_counts_band_rows() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("in.csv"), THREE_ROWS).unwrap();
    let o = lrfit(tmp.path(), &["filter", "--input", "in.csv", "--output-dir", "out", "--noise-band", "-120:-100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "kept 2, removed 1");
    let log = fs::read_to_string(tmp.path().join("out/filter_log.csv")).unwrap();
    assert_eq!(log, "original_index,reason\n0,thermal-noise band\n");
    let report = toml_file(&tmp.path().join("out/filter.toml"));
    assert_eq!(report["filter"]["kept"].as_integer(), Some(2));
    assert_eq!(report["filter"]["removed"].as_integer(), Some(1));
}

#[test]
fn filter_off_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("in.csv"), THREE_ROWS).unwrap();
    let o = lrfit(tmp.path(), &["filter", "--input", "in.csv", "--output-dir", "out", "--noise-band", "off"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "kept 3, removed 0");
    let filtered = fs::read_to_string(tmp.path().join("out/filtered.csv")).unwrap();
    assert_eq!(filtered, THREE_ROWS);
}

#[test]
fn empty_input_fails_with_empty_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("empty.csv"), "").unwrap();
    let o = lrfit(tmp.path(), &["filter", "--input", "empty.csv", "--output-dir", "out"]);
    let err = assert_one_line_failure(&o);
    assert!(err.contains("empty dataset"), "{err}");
}

#[test]
fn fit_restricted_presets_yields_two_candidates() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &[]);
    let o = lrfit(tmp.path(), &["fit", "--input", "data.csv", "--output-dir", "out", "--presets", "offset-correction"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = toml_file(&tmp.path().join("out/fit.toml"));
    let cands = report["fit"]["candidates"].as_array().unwrap();
    let names: Vec<&str> = cands.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["offset-correction/ols", "offset-correction/lar"]);
}

#[test]
fn fit_reports_recovered_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &["--coefficients", "0.9,-2,3,0.002,0.5"]);
    let o = lrfit(tmp.path(), &["fit", "--input", "data.csv", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = toml_file(&tmp.path().join("out/fit.toml"));
    assert_eq!(report["fit"]["comparison"]["selected"].as_str(), Some("full-correction/ols"));
    let full = report["fit"]["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str() == Some("full-correction/ols"))
        .unwrap();
    for (label, want) in [("A", 0.9), ("B", -2.0), ("C", 3.0), ("D", 0.002), ("E", 0.5)] {
        let got = full["coefficients"][label].as_float().unwrap();
        assert!((got - want).abs() < 1e-6, "{label}: {got}");
    }
    assert!(tmp.path().join("out/model.toml").exists());
}

#[test]
fn fit_without_p_lr_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("in.csv"), "p_rx,d,p_tx,h,f\n-80,1000,30,10,30\n").unwrap();
    let o = lrfit(tmp.path(), &["fit", "--input", "in.csv", "--output-dir", "out"]);
    let err = assert_one_line_failure(&o);
    assert!(err.contains("schema error") && err.contains("p_lr"), "{err}");
}

#[test]
fn bad_config_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &[]);
    fs::write(tmp.path().join("run.toml"), "holdout = 20\nnoise_bands = \"off\"\n").unwrap();
    let o = lrfit(tmp.path(), &["run", "--input", "data.csv", "--config", "run.toml", "--output-dir", "out"]);
    let err = assert_one_line_failure(&o);
    assert!(err.contains("noise_bands"), "{err}");
}

#[test]
fn empty_config_file_is_valid() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &["--noise-sd", "1"]);
    fs::write(tmp.path().join("run.toml"), "").unwrap();
    let o = lrfit(tmp.path(), &["run", "--input", "data.csv", "--config", "run.toml", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn run_planted_selects_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &[]);
    let o = lrfit(tmp.path(), &["run", "--input", "data.csv", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = toml_file(&tmp.path().join("out/report.toml"));
    assert_eq!(report["fit"]["comparison"]["selected"].as_str(), Some("offset-correction/ols"));
    let best = report["fit"]["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str() == Some("offset-correction/ols"))
        .unwrap();
    assert_eq!(best["validation"]["improved"].as_bool(), Some(true));
    assert_eq!(best["fixed_coefficients"]["A"].as_float(), Some(1.0));
    for (label, want) in [("B", -2.0), ("C", 3.0), ("E", 0.5)] {
        assert!((best["coefficients"][label].as_float().unwrap() - want).abs() < 1e-6);
    }
    for section in ["filter", "fit", "diagnose"] {
        assert!(report.contains_key(section), "{section}");
    }
}

#[test]
fn run_gaussian_discrepancy_exits_zero_at_gate() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &["--coefficients", "1,0,0,0,0", "--noise-sd", "2", "--seed", "11"]);
    let o = lrfit(tmp.path(), &["run", "--input", "data.csv", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("discrepancy is random"));
    let report = toml_file(&tmp.path().join("out/report.toml"));
    assert_eq!(report["fit"]["outcome"].as_str(), Some("discrepancy-is-random"));
    assert!(report["fit"]["candidates"].as_array().unwrap().is_empty());
}

#[test]
fn diagnose_clean_synthetic_passes_checklist() {
    let tmp = tempfile::tempdir().unwrap();
    synth(
        tmp.path(),
        "data.csv",
        &["--rows", "120", "--coefficients", "0.9,-2,3,0.002,0.5", "--noise-sd", "2", "--seed", "7"],
    );
    let o = lrfit(tmp.path(), &["diagnose", "--input", "data.csv", "--output-dir", "out", "--holdout", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = toml_file(&tmp.path().join("out/diagnose.toml"));
    let full = report["diagnose"]["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str() == Some("full-correction/ols"))
        .unwrap();
    let checklist = full["report"]["checklist"].as_table().unwrap();
    assert_eq!(checklist.len(), 7);
    for (name, v) in checklist {
        assert_eq!(v["status"].as_str(), Some("pass"), "{name}: {v}");
    }
}

#[test]
fn cdf_table_rows_match_distinct_values() {
    let tmp = tempfile::tempdir().unwrap();
    // two duplicated rows give a repeated e_LR value
    let mut text = String::from("p_rx,d,p_tx,h,f,p_lr\n");
    for i in 0..12 {
        let d = 1000.0 + 500.0 * f64::from(i);
        text.push_str(&format!("{},{d},30,{},30,-90\n", -60.0 + f64::from(i * i) * 0.7, 10 + i));
    }
    text.push_str("-60,1000,30,10,30,-90\n");
    fs::write(tmp.path().join("in.csv"), &text).unwrap();
    let o = lrfit(tmp.path(), &["diagnose", "--input", "in.csv", "--output-dir", "out", "--holdout", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cdf = fs::read_to_string(tmp.path().join("out/cdf_e_lr.csv")).unwrap();
    assert_eq!(cdf.lines().next(), Some("value,fraction"));
    assert_eq!(cdf.lines().count() - 1, 12);
    assert!(cdf.trim_end().ends_with(",1"));
}

#[test]
fn duplicated_predictor_fails_multicollinearity() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &["--noise-sd", "1"]);
    // replace h by an exact function of log d
    let text = fs::read_to_string(tmp.path().join("data.csv")).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let mut v: Vec<String> = line.split(',').map(String::from).collect();
            let d: f64 = v[1].parse().unwrap();
            v[3] = (100.0 * d.log10() - 250.0).to_string();
            out.push_str(&v.join(","));
        }
        out.push('\n');
    }
    fs::write(tmp.path().join("dup.csv"), out).unwrap();
    let o = lrfit(tmp.path(), &["diagnose", "--input", "dup.csv", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = toml_file(&tmp.path().join("out/diagnose.toml"));
    let full = report["diagnose"]["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str() == Some("full-correction/ols"))
        .unwrap();
    let v = &full["report"]["checklist"]["multicollinearity"];
    assert_eq!(v["status"].as_str(), Some("fail"), "{v}");
    assert!(v["note"].as_str().unwrap().contains("dropped: D"), "{v}");
}

#[test]
fn predict_reproduces_training_rows_and_passthrough() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &["--coefficients", "0.9,-2,3,0.002,0.5", "--rows", "200"]);
    let o = lrfit(tmp.path(), &["fit", "--input", "data.csv", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = lrfit(tmp.path(), &["predict", "--input", "data.csv", "--model", "out/model.toml", "--output-dir", "pred"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let observed: Vec<f64> = fs::read_to_string(tmp.path().join("data.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let predicted: Vec<f64> = fs::read_to_string(tmp.path().join("pred/predictions.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(observed.len(), predicted.len());
    for (o, p) in observed.iter().zip(&predicted) {
        assert!((o - p).abs() < 1e-6, "{o} vs {p}");
    }

    // zero-coefficient offset model passes p_lr through
    let zero = "candidate = \"offset-correction/ols\"\nmethod = \"ols\"\n\n[model]\nname = \"offset-correction\"\nintercept = \"E\"\n\n[model.response]\nfield = \"p_rx\"\ntransform = \"log10\"\noffset = \"p_lr\"\noffset_label = \"A\"\n\n[[model.terms]]\nlabel = \"B\"\nfield = \"f\"\ntransform = \"log10\"\n\n[[model.terms]]\nlabel = \"C\"\nfield = \"d\"\ntransform = \"log10\"\n\n[coefficients]\nB = 0.0\nC = 0.0\nE = 0.0\n";
    fs::write(tmp.path().join("zero.toml"), zero).unwrap();
    fs::write(tmp.path().join("q.csv"), "d,f,p_lr\n1500,25,-87.25\n20000,39,-101.5\n").unwrap();
    let o = lrfit(tmp.path(), &["predict", "--input", "q.csv", "--model", "zero.toml", "--output-dir", "pz"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("pz/predictions.csv")).unwrap(), "row,p_rx\n0,-87.25\n1,-101.5\n");
}

#[test]
fn predict_missing_field_and_empty_query() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data.csv", &["--coefficients", "0.9,-2,3,0.002,0.5", "--rows", "200"]);
    assert!(lrfit(tmp.path(), &["fit", "--input", "data.csv", "--output-dir", "out", "--quiet"]).status.success());
    assert!(tmp.path().join("out/model.toml").exists());

    fs::write(tmp.path().join("q.csv"), "d,f,p_lr,h\n1500,25,-87,10\n1500,25,-87,\n").unwrap();
    let o = lrfit(tmp.path(), &["predict", "--input", "q.csv", "--model", "out/model.toml", "--output-dir", "p"]);
    let err = assert_one_line_failure(&o);
    assert!(err.contains("query row 1") && err.contains('h'), "{err}");

    fs::write(tmp.path().join("empty.csv"), "").unwrap();
    let o = lrfit(tmp.path(), &["predict", "--input", "empty.csv", "--model", "out/model.toml", "--output-dir", "p"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("p/predictions.csv")).unwrap(), "row,p_rx\n");
}

#[test]
fn pipeline_step_errors_are_named() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("in.csv"), THREE_ROWS).unwrap();
    let o = lrfit(tmp.path(), &["run", "--input", "in.csv", "--output-dir", "out", "--noise-band", "-130:-80"]);
    let err = assert_one_line_failure(&o);
    assert!(err.starts_with("error: filter: empty dataset"), "{err}");

    let o = lrfit(tmp.path(), &["run", "--input", "missing.csv", "--output-dir", "out"]);
    let err = assert_one_line_failure(&o);
    assert!(err.starts_with("error: load:"), "{err}");
}

#[test]
fn usage_errors_are_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lrfit(tmp.path(), &["fit", "--holdout", "many"]);
    assert_one_line_failure(&o);
    let o = lrfit(tmp.path(), &["bogus"]);
    assert_one_line_failure(&o);
}
