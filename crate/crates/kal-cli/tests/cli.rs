//! End-to-end tests driving the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn kal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kal")).args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

/// Flags for a seconds-scale experiment.
const TINY: &[&str] = &[
    "--xor-samples",
    "120",
    "--folds",
    "6",
    "--fold-limit",
    "1",
    "--n",
    "5",
    "--p",
    "2",
    "--q",
    "3",
    "--epochs",
    "40",
    "--learning-rate",
    "1e-2",
    "--hidden",
    "16",
];

fn tiny_run(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", "--dataset", "xor", "--strategy", "kal"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", out]);
    kal(&args)
}

#[test]
fn run_writes_summary_curves_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let output = tiny_run(dir.path(), &[]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    assert!(stdout(&output).contains("mean AUBC"));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["dataset"], "xor");
    assert_eq!(summary["strategy"], "kal");
    assert_eq!(summary["trials"].as_array().unwrap().len(), 1);
    assert!(summary["mean_aubc"].as_f64().unwrap().is_finite());

    // One header plus q + 1 = 4 checkpoints for the single trial.
    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    let lines: Vec<&str> = curves.lines().collect();
    assert_eq!(lines[0], "fold,seed,labeled,primary,aux");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,0,5,"));
    assert!(lines[4].starts_with("0,0,11,"));

    let mean: Vec<String> = std::fs::read_to_string(dir.path().join("mean_curve.csv"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(mean[0], "labeled,primary,aux");
    assert_eq!(mean.len(), 5);

    // The manifest digests every written file.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "run");
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, vec!["summary.json", "curves.csv", "mean_curve.csv"]);
    for file in files {
        let digest = file["sha256"].as_str().unwrap();
        assert_eq!(digest.len(), 64);
        assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    }
}

#[test]
fn snapshots_round_trip_into_audit() {
    let dir = tempfile::tempdir().unwrap();
    let output = tiny_run(dir.path(), &["--save-snapshots"]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let snapshot = dir.path().join("snapshots/model_fold0_seed0.bin");
    assert!(snapshot.exists());

    let output = kal(&[
        "audit",
        "--dataset",
        "xor",
        "--xor-samples",
        "120",
        "--snapshot",
        snapshot.to_str().unwrap(),
        "--json",
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    let per_rule = report["per_rule"].as_array().unwrap();
    assert_eq!(per_rule.len(), 1);
    assert_eq!(per_rule[0]["rule"], "xor_iff");
    assert!(report["total"].as_f64().unwrap() >= 0.0);

    // The table form mentions the rule too.
    let output = kal(&[
        "audit",
        "--dataset",
        "xor",
        "--xor-samples",
        "120",
        "--snapshot",
        snapshot.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(stdout(&output).contains("xor_iff"));
    assert!(stdout(&output).contains("mean per sample"));
}

#[test]
fn extraction_runs_dump_their_rules() {
    let dir = tempfile::tempdir().unwrap();
    let output = tiny_run(dir.path(), &["--dump-xai-rules"]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    // The plain knowledge strategy extracts nothing.
    assert!(!dir.path().join("xai_rules_fold0_seed0.kal").exists());

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["run", "--dataset", "xor", "--strategy", "kal_xai"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--dump-xai-rules", "--out", out]);
    let output = kal(&args);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let dumped = std::fs::read_to_string(dir.path().join("xai_rules_fold0_seed0.kal")).unwrap();
    assert!(dumped.contains("rule one_class:"), "dump was {dumped:?}");
}

#[test]
fn compile_prints_canonical_rules_and_lowered_terms() {
    let output = kal(&["compile", "--dataset", "iris"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("# 4 rules, 5 bindings, product t-norm, one_minus generator"));
    assert!(text.contains("rule setosa_signature: not long_petal <=> setosa"));
    assert!(text.contains("where:"));

    // An explicit schema compiles a standalone rule file.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("custom.kal");
    std::fs::write(
        &path,
        "input hot = feature(0) > 0.7\noutput alarm = class(0)\nrule alert: hot => alarm\n",
    )
    .unwrap();
    let output = kal(&[
        "compile",
        "--rules",
        path.to_str().unwrap(),
        "--input-dim",
        "3",
        "--output-dim",
        "1",
        "--task",
        "binary",
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    assert!(stdout(&output).contains("rule alert: hot => alarm"));
}

#[test]
fn ablation_reports_each_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["ablate", "--dataset", "xor", "--strategy", "kal"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--fractions", "0,1", "--out", out]);
    let output = kal(&args);
    assert!(output.status.success(), "stderr: {}", stderr(&output));

    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ablation.json")).unwrap())
            .unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["fraction"], 0.0);
    assert!(rows[0]["mean_audit_total"].is_null(), "no rules left at fraction zero");
    assert!(rows[1]["mean_audit_total"].as_f64().is_some());

    let csv = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "fraction,mean_aubc,std_aubc,mean_audit_total");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn failures_map_to_the_documented_exit_codes() {
    // 1: the flags make no sense.
    let output = kal(&["run", "--dataset", "mnist", "--strategy", "kal", "--out", "/tmp/unused"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("unknown dataset"));

    let output = kal(&["run", "--dataset", "xor", "--strategy", "nope", "--out", "/tmp/unused"]);
    assert_eq!(output.status.code(), Some(1), "clap flag errors are config errors");

    let dir = tempfile::tempdir().unwrap();
    let output = kal(&[
        "run",
        "--dataset",
        "xor",
        "--strategy",
        "kal",
        "--xor-samples",
        "50",
        "--q",
        "10000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("exceeds"));

    // 2: input files are missing or broken.
    let output = tiny_run(dir.path(), &["--rules", "/does/not/exist.kal"]);
    assert_eq!(output.status.code(), Some(2));

    let bad = dir.path().join("bad.kal");
    std::fs::write(&bad, "rule broken: nope\n").unwrap();
    let output = tiny_run(dir.path(), &["--rules", bad.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));

    // 3: the run fails after starting. The three-way exclusive-or in
    // the iris rules has no Goedel lowering.
    let output = kal(&["compile", "--dataset", "iris", "--tnorm", "goedel"]);
    assert_eq!(output.status.code(), Some(3));
    assert!(stderr(&output).contains("goedel"));

    // 0: help never fails.
    let output = kal(&["--help"]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).contains("run"));
}
