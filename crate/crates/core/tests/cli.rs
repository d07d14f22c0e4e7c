//! End-to-end runs of the `acm` binary.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use acm::classifiers::ClassifierParams;
use acm::data::{write_epochset, EpochSet, Session};
use acm::eval::{EvalKind, EvalReport, Metric, PipelineSummary, SessionScore, SplitResult};
use common::*;
use nalgebra::DMatrix;
use serde_json::Value;

fn acm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acm"))
        .args(args)
        .env_remove("ACM_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = acm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the parsed JSON error line.
fn failure(args: &[&str]) -> (i32, Value) {
    let out = acm(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let line = String::from_utf8_lossy(&out.stderr);
    let err: Value = serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("not JSON: {line}"));
    (out.status.code().unwrap(), err)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate_matched(dir: &Path, name: &str, seed: u64, per_class: usize, sessions: usize) -> PathBuf {
    let path = dir.join(name);
    ok(&[
        "simulate",
        "--preset",
        "matched",
        "--seed",
        &seed.to_string(),
        "--epochs-per-class",
        &per_class.to_string(),
        "--sessions",
        &sessions.to_string(),
        "--subject",
        name,
        "--out",
        s(&path),
    ]);
    path
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate_matched(dir.path(), "a.acm", 3, 10, 1);
    let b = dir.path().join("b.acm");
    ok(&["simulate", "--preset", "matched", "--seed", "3", "--epochs-per-class", "10", "--subject", "a.acm", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let set = acm::data::read_epochset(&a).unwrap();
    assert_eq!(set.n_epochs(), 20);
    assert_eq!(set.channels(), 4);
}

#[test]
fn simulate_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"sample_rate": 100.0, "n_samples": 64, "epochs_per_class": 3, "seed": 1,
            "classes": [
              {"name": "slow", "coefficients": [[[0.9]]], "innovation": [[1.0]]},
              {"name": "fast", "coefficients": [[[-0.5]]], "innovation": [[1.0]]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("x.acm");
    let summary: Value = serde_json::from_str(&ok(&["simulate", "--spec", s(&spec), "--out", s(&out)])).unwrap();
    assert_eq!(summary["channels"], 1);
    assert_eq!(acm::data::read_epochset(&out).unwrap().n_epochs(), 6);

    fs::write(
        &spec,
        r#"{"sample_rate": 100.0, "n_samples": 64, "epochs_per_class": 3, "seed": 1,
            "classes": [{"name": "boom", "coefficients": [[[1.2]]], "innovation": [[1.0]]}]}"#,
    )
    .unwrap();
    let (code, err) = failure(&["simulate", "--spec", s(&spec), "--out", s(&out)]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "UnstableSpec");
}

#[test]
fn estimate_params_on_sine_and_constant_data() {
    let dir = tempfile::tempdir().unwrap();
    let sine = dir.path().join("sine.acm");
    ok(&["simulate", "--preset", "sine", "--epochs-per-class", "4", "--seed", "1", "--out", s(&sine)]);

    let out = dir.path().join("ami");
    ok(&["estimate-params", "--input", s(&sine), "--max-lag", "32", "--out", s(&out)]);
    let est: Value = serde_json::from_str(&fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
    let tau = est["tau"].as_u64().unwrap();
    assert!(tau.abs_diff(16) <= 2, "{tau}");
    assert!(out.join("ami.csv").is_file() && out.join("cao_e1.csv").is_file());
    assert!(out.join("manifest.json").is_file());

    let out = dir.path().join("mdop");
    ok(&["estimate-params", "--input", s(&sine), "--param-source", "mdop", "--out", s(&out)]);
    let est: Value = serde_json::from_str(&fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
    assert_eq!(est["clean"], true, "{est}");
    assert!(est["D"].as_u64().unwrap() <= 10);

    let flat = EpochSet::new(
        "flat",
        vec!["a".into(), "b".into()],
        250.0,
        vec![Session {
            id: "s".into(),
            epochs: (0..4).map(|_| epoch_from(DMatrix::from_element(2, 200, 1.5))).collect(),
            labels: vec![0, 1, 0, 1],
        }],
    )
    .unwrap();
    let path = dir.path().join("flat.acm");
    write_epochset(&flat, &path).unwrap();
    let (code, err) = failure(&["estimate-params", "--input", s(&path), "--out", s(&dir.path().join("f"))]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "ConstantSeries");
}

fn evaluate(input: &[&Path], out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["evaluate", "--input"];
    args.extend(input.iter().map(|p| s(p)));
    args.extend(["--pipeline", "MDM", "ACM+MDM", "--seed", "7", "--out", s(out)]);
    args.extend(extra);
    acm(&args)
}

#[test]
fn evaluate_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate_matched(dir.path(), "s1", 1, 20, 1);
    let b = simulate_matched(dir.path(), "s2", 2, 20, 1);
    let grid = ["--grid-max-order", "3", "--grid-max-lag", "2"];
    let mut reports = Vec::new();
    for (i, workers) in ["1", "1", "8"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let mut extra = vec!["--workers", workers];
        extra.extend(grid);
        let o = evaluate(&[&a, &b], &out, &extra);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);

    let out = dir.path().join("run0");
    for f in ["report.csv", "timing.csv", "timing_summary.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let grids: Vec<_> = fs::read_dir(out.join("grids")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(grids.iter().any(|p| p.extension().is_some_and(|e| e == "svg")));
    assert!(grids.iter().any(|p| p.extension().is_some_and(|e| e == "csv")));

    let report = EvalReport::from_json(&String::from_utf8(reports[0].clone()).unwrap()).unwrap();
    assert_eq!(report.subjects, vec!["s1", "s2"]);
    let acm_mean = report.summary.iter().find(|p| p.pipeline.starts_with("ACM+MDM")).unwrap().mean;
    assert!(acm_mean >= 0.9, "{acm_mean}");
}

#[test]
fn evaluate_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let single = simulate_matched(dir.path(), "one", 1, 10, 1);

    let o = evaluate(&[&single], &dir.path().join("cs"), &["--eval", "cs"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"], "SingleSession");

    let (code, _) = failure(&["evaluate", "--input", s(&single), "--pipeline", "LDA", "--seed", "1", "--out", "x"]);
    assert_eq!(code, 2);
    let (code, _) = failure(&["evaluate", "--input", s(&single), "--pipeline", "MDM", "--out", "x"]);
    assert_eq!(code, 2);
    let (code, err) = failure(&[
        "evaluate",
        "--input",
        s(&dir.path().join("missing.acm")),
        "--pipeline",
        "MDM",
        "--seed",
        "1",
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "MissingInput");
}

#[test]
fn cross_session_evaluation_runs() {
    let dir = tempfile::tempdir().unwrap();
    let two = simulate_matched(dir.path(), "two", 4, 10, 2);
    let out = dir.path().join("cs");
    let o = evaluate(&[&two], &out, &["--eval", "cs", "--param-source", "fixed", "--order", "2", "--lag", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = EvalReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.evaluation, EvalKind::Cs);
    assert_eq!(report.splits.len(), 4);
}

/// A report of one pipeline with one within-session split per subject.
fn report(pipeline: &str, scores: &[f64]) -> EvalReport {
    let subjects: Vec<String> = (0..scores.len()).map(|i| format!("sub{i}")).collect();
    let splits = subjects
        .iter()
        .zip(scores)
        .map(|(sub, &score)| SplitResult {
            subject: sub.clone(),
            pipeline: pipeline.into(),
            session: "session0".into(),
            split: "fold0".into(),
            score,
            order: 1,
            lag: 1,
            classifier: ClassifierParams::Mdm,
            timing: Default::default(),
            grid: None,
        })
        .collect();
    let sessions = subjects
        .iter()
        .zip(scores)
        .map(|(sub, &score)| SessionScore {
            subject: sub.clone(),
            pipeline: pipeline.into(),
            session: "session0".into(),
            score,
            n_splits: 1,
        })
        .collect();
    EvalReport {
        dataset: "toy".into(),
        evaluation: EvalKind::Ws,
        metric: Metric::Auc,
        seed: 0,
        folds: Some(1),
        pipelines: vec![pipeline.into()],
        subjects,
        splits,
        sessions,
        summary: vec![PipelineSummary {
            pipeline: pipeline.into(),
            mean: scores.iter().sum::<f64>() / scores.len() as f64,
            std: 0.0,
            n_subjects: scores.len(),
        }],
    }
}

fn hypothesis<'a>(meta: &'a Value, name: &str) -> &'a Value {
    meta["hypotheses"].as_array().unwrap().iter().find(|h| h["hypothesis"] == name).unwrap()
}

#[test]
fn stats_on_constructed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, r: &EvalReport| {
        let p = dir.path().join(name);
        fs::write(&p, r.to_json()).unwrap();
        p
    };
    let better = write("a.json", &report("A", &[0.90, 0.92, 0.95, 0.91, 0.97, 0.93]));
    let worse = write("b.json", &report("B", &[0.60, 0.70, 0.65, 0.72, 0.61, 0.69]));

    let meta: Value = serde_json::from_str(&ok(&["stats", s(&better), s(&worse)])).unwrap();
    let h = hypothesis(&meta, "A > B");
    assert!((h["p_combined"].as_f64().unwrap() - 1.0 / 64.0).abs() < 1e-12, "{h}");
    assert_eq!(h["datasets"][0]["test"], "permutation_t");
    assert_eq!(meta["correction_factor"], 2);

    let out = dir.path().join("self");
    let meta: Value = serde_json::from_str(&ok(&["stats", s(&better), s(&better), "--out", s(&out)])).unwrap();
    let h = hypothesis(&meta, "A > A #2");
    assert_eq!(h["p_combined"], 0.5);
    assert_eq!(h["p_corrected"], 1.0);
    assert_eq!(h["smd"], 0.0);
    assert!(out.join("meta.csv").is_file() && out.join("manifest.json").is_file());

    let fewer = write("c.json", &report("C", &[0.9, 0.9, 0.9, 0.9, 0.9]));
    let (code, err) = failure(&["stats", s(&better), s(&fewer)]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "PairingViolation");
}

#[test]
fn export_csv_writes_one_file_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate_matched(dir.path(), "e", 5, 3, 1);
    let out = dir.path().join("csv");
    ok(&["export-csv", "--input", s(&input), "--out", s(&out)]);
    let labels = fs::read_to_string(out.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 1 + 6);
    assert_eq!(fs::read_dir(out.join("epochs")).unwrap().count(), 6);
    let first = fs::read_dir(out.join("epochs")).unwrap().next().unwrap().unwrap().path();
    // One row per channel, one column per sample.
    let text = fs::read_to_string(first).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.split(',').count() == 512));
}
