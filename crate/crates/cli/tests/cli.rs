//! Command-level behavior: exit codes, overwrite protection, sweep
//! bookkeeping, and the per-command examples that don't need long training.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairrep"))
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fairrep-cli-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn make_cache(dir: &Path, seed: u64) -> PathBuf {
    let cache = dir.join("data.bin");
    let status = bin()
        .args([
            "synth", "--out", cache.to_str().unwrap(), "--n", "800", "--d", "3",
            "--delta", "1", "--bias-s", "1", "--seed", &seed.to_string(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    cache
}

#[test]
fn missing_dataset_path_exits_2_and_names_it() {
    let out = bin()
        .args(["train", "--data", "/no/such/data.bin", "--mode", "sup"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/no/such/data.bin"), "{stderr}");
}

#[test]
fn unknown_command_and_bad_flags_exit_2() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["train", "--lambda"]) // missing value
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_seeds_pass_and_injected_failure_exits_1() {
    let dir = fresh_dir("verify");
    for seed in ["7", "8"] {
        let out_file = dir.join(format!("verify-{seed}.json"));
        let out = bin()
            .args(["verify", "--seed", seed, "--out", out_file.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "seed {seed} should pass");
        let text = std::fs::read_to_string(&out_file).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        let entries = json.as_array().unwrap();
        assert!(!entries.is_empty());
        for e in entries {
            assert_eq!(e["status"], "pass");
            assert!(e["measured"].is_number());
            assert!(e["threshold"].is_number());
        }
    }
    let out = bin()
        .args(["verify", "--seed", "7", "--inject-failure"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reruns_refuse_to_overwrite_without_force() {
    let dir = fresh_dir("force");
    let cache = make_cache(&dir, 3);
    let runs = dir.join("runs");
    let train = |extra: &[&str]| {
        let mut args = vec![
            "train", "--data", cache.to_str().unwrap(), "--mode", "sup",
            "--lambda", "0", "--seed", "1", "--epochs", "2", "--m", "2",
            "--batch-size", "128", "--out", runs.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        bin().args(&args).output().unwrap()
    };
    assert_eq!(train(&[]).status.code(), Some(0));
    let second = train(&[]);
    assert_eq!(second.status.code(), Some(2), "rerun must refuse");
    assert!(String::from_utf8_lossy(&second.stderr).contains("--force"));
    assert_eq!(train(&["--force"]).status.code(), Some(0));
}

#[test]
fn lambda_trend_shows_in_reports() {
    let dir = fresh_dir("trend");
    let cache = make_cache(&dir, 11);
    let mut dps = Vec::new();
    for lambda in ["0", "10"] {
        let out = dir.join(format!("runs-{lambda}"));
        let status = bin()
            .args([
                "train", "--data", cache.to_str().unwrap(), "--mode", "sup",
                "--lambda", lambda, "--seed", "2", "--epochs", "40", "--m", "3",
                "--batch-size", "128", "--out", out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        let run_dir = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap())
                .unwrap();
        dps.push(report["dp"].as_f64().unwrap());
    }
    assert!(
        dps[1] < dps[0],
        "regularized rate gap {:.4} must fall below unregularized {:.4}",
        dps[1],
        dps[0]
    );
}

#[test]
fn sweep_single_lambda_and_duplicates() {
    let dir = fresh_dir("sweep");
    let cache = make_cache(&dir, 5);
    let out = dir.join("sw");
    let status = bin()
        .args([
            "sweep", "--data", cache.to_str().unwrap(), "--mode", "sup",
            "--lambdas", "1,1,1", "--seed", "4", "--epochs", "2", "--m", "2",
            "--batch-size", "128", "--out", out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let sweep_dir = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("sweep-"))
        .unwrap();
    let pareto = std::fs::read_to_string(sweep_dir.join("pareto.csv")).unwrap();
    assert_eq!(pareto.lines().count(), 2, "header plus exactly one row:\n{pareto}");
    // duplicates deduplicated: exactly one run directory
    let run_dirs = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("run-"))
        .count();
    assert_eq!(run_dirs, 1);
}

#[test]
fn sweep_records_failures_and_continues() {
    let dir = fresh_dir("sweep-fail");
    let cache = make_cache(&dir, 8);
    let out = dir.join("sw");
    // a negative lambda fails config validation; the remaining run proceeds
    let result = bin()
        .args([
            "sweep", "--data", cache.to_str().unwrap(), "--mode", "sup",
            "--lambdas", "-1,0.5", "--seed", "4", "--epochs", "2", "--m", "2",
            "--batch-size", "128", "--out", out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("failed"), "{stderr}");
    let sweep_dir = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("sweep-"))
        .unwrap();
    let pareto = std::fs::read_to_string(sweep_dir.join("pareto.csv")).unwrap();
    assert_eq!(pareto.lines().count(), 2, "{pareto}");
}

#[test]
fn downstream_reports_per_arch_and_rejects_unknown_names() {
    let dir = fresh_dir("downstream");
    let cache = make_cache(&dir, 6);
    let runs = dir.join("runs");
    let status = bin()
        .args([
            "train", "--data", cache.to_str().unwrap(), "--mode", "unsup",
            "--lambda", "0", "--seed", "1", "--epochs", "3", "--m", "3",
            "--batch-size", "128", "--out", runs.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let ck = std::fs::read_dir(&runs)
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path()
        .join("checkpoint.json");

    let ds_out = dir.join("ds");
    let status = bin()
        .args([
            "downstream", "--checkpoint", ck.to_str().unwrap(),
            "--data", cache.to_str().unwrap(),
            "--archs", "linear,leakyrelu1,sigmoid1,sigmoid2",
            "--downstream-epochs", "3", "--seed", "2",
            "--out", ds_out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report_dir = std::fs::read_dir(&ds_out).unwrap().next().unwrap().unwrap().path();
    let mut json_reports = 0;
    for entry in std::fs::read_dir(&report_dir).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().to_string();
        if name.starts_with("report-") && name.ends_with(".json") {
            json_reports += 1;
        }
    }
    assert_eq!(json_reports, 4, "one report per requested arch");

    let out = bin()
        .args([
            "downstream", "--checkpoint", ck.to_str().unwrap(),
            "--data", cache.to_str().unwrap(), "--archs", "rbf-svm",
            "--out", dir.join("ds2").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("linear") && stderr.contains("sigmoid2"),
        "error must list valid names: {stderr}"
    );
}

#[test]
fn downstream_same_seed_same_reports() {
    let dir = fresh_dir("downstream-det");
    let cache = make_cache(&dir, 9);
    let runs = dir.join("runs");
    assert!(bin()
        .args([
            "train", "--data", cache.to_str().unwrap(), "--mode", "sup",
            "--lambda", "0", "--seed", "1", "--epochs", "2", "--m", "2",
            "--batch-size", "128", "--out", runs.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let ck = std::fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path().join("checkpoint.json");
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.join(sub);
        assert!(bin()
            .args([
                "downstream", "--checkpoint", ck.to_str().unwrap(),
                "--data", cache.to_str().unwrap(), "--archs", "linear",
                "--downstream-epochs", "3", "--seed", "5",
                "--out", out.to_str().unwrap(),
            ])
            .status()
            .unwrap()
            .success());
        let report_dir = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
        outputs.push(std::fs::read(report_dir.join("report-linear.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn synth_ground_truth_reflects_the_planted_bias() {
    let dir = fresh_dir("synth");
    // identical group distributions: Bayes rate gap is noise
    let fair = dir.join("fair.bin");
    assert!(bin()
        .args([
            "synth", "--out", fair.to_str().unwrap(), "--n", "500", "--d", "2",
            "--delta", "0", "--bias-s", "0", "--seed", "2",
        ])
        .status()
        .unwrap()
        .success());
    let gt: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("fair.gt.json")).unwrap(),
    )
    .unwrap();
    assert!(gt["bayes_dp"].as_f64().unwrap() < 0.01);
    assert_eq!(gt["mc_draws"].as_u64().unwrap(), 1_000_000);

    let biased = dir.join("biased.bin");
    assert!(bin()
        .args([
            "synth", "--out", biased.to_str().unwrap(), "--n", "500", "--d", "4",
            "--delta", "1", "--bias-s", "1", "--seed", "2",
        ])
        .status()
        .unwrap()
        .success());
    let gt: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("biased.gt.json")).unwrap(),
    )
    .unwrap();
    assert!(gt["bayes_dp"].as_f64().unwrap() > 0.3);
}

#[test]
fn synth_meets_its_timing_budget() {
    let dir = fresh_dir("synth-time");
    let start = std::time::Instant::now();
    assert!(bin()
        .args([
            "synth", "--out", dir.join("big.bin").to_str().unwrap(),
            "--n", "10000", "--d", "4", "--delta", "1", "--seed", "1",
        ])
        .status()
        .unwrap()
        .success());
    let elapsed = start.elapsed();
    assert!(
        elapsed < std::time::Duration::from_secs(5),
        "synth took {elapsed:?}"
    );
}

#[test]
fn report_command_evaluates_a_checkpoint() {
    let dir = fresh_dir("report");
    let cache = make_cache(&dir, 13);
    let runs = dir.join("runs");
    assert!(bin()
        .args([
            "train", "--data", cache.to_str().unwrap(), "--mode", "sup",
            "--lambda", "0", "--seed", "1", "--epochs", "2", "--m", "2",
            "--batch-size", "128", "--out", runs.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let run_dir = std::fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    let out_file = dir.join("eval.json");
    assert!(bin()
        .args([
            "report", "--checkpoint", run_dir.join("checkpoint.json").to_str().unwrap(),
            "--data", cache.to_str().unwrap(), "--split", "test",
            "--out", out_file.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    // the standalone evaluation matches the training run's own test report
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(a, b);
    // CSV twin exists with the fixed column order
    let csv = std::fs::read_to_string(out_file.with_extension("csv")).unwrap();
    assert!(csv.starts_with("acc,dp,mdp,sdp,vdp,eopp,eo\n"));
}

#[test]
fn csv_pipeline_runs_end_to_end() {
    let dir = fresh_dir("csv");
    // a small synthetic CSV in the spirit of the tabular benchmarks
    let mut text = String::from("age,grade,s,y\n");
    let mut state = 9u64;
    for i in 0..120 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
        let age = 20 + (state >> 33) % 60;
        let grade = ["low", "mid", "high"][(i % 3) as usize];
        let s = (i % 2) as u64;
        let y = u64::from((age + 10 * s) > 50);
        text.push_str(&format!("{age},{grade},{s},{y}\n"));
    }
    let csv_path = dir.join("toy.csv");
    std::fs::write(&csv_path, text).unwrap();
    let spec_path = dir.join("spec.toml");
    std::fs::write(
        &spec_path,
        r#"
[[rules]]
rule = "binarize"
column = "age"
threshold = 50.0

[[rules]]
rule = "dummy"

[[rules]]
rule = "select"
label = "y"
sensitive = "s"
"#,
    )
    .unwrap();
    let status = bin()
        .args([
            "train", "--csv", csv_path.to_str().unwrap(),
            "--preprocess", spec_path.to_str().unwrap(),
            "--mode", "sup", "--lambda", "0", "--seed", "1", "--epochs", "2",
            "--m", "2", "--batch-size", "32",
            "--test-frac", "0.25", "--val-frac", "0.25",
            "--out", dir.join("runs").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
}
