//! Report and history serialization. The fairness report is one flat JSON
//! object and one CSV row with the fixed column order
//! `acc, dp, mdp, sdp, vdp, eopp, eo` (JSON adds `mdp_raw`, the mean gap on
//! raw logits). Floats print with Rust's shortest round-trip formatting, so
//! identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use fairrep_core::metrics::FairnessReport;
use fairrep_core::theory::VerifyReport;
use fairrep_core::train::TrainHistory;

use crate::{CliError, CliResult};

pub fn report_csv(report: &FairnessReport) -> String {
    let mut out = String::from("acc,dp,mdp,sdp,vdp,eopp,eo\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        report.acc, report.dp, report.mdp, report.sdp, report.vdp, report.eopp, report.eo
    );
    out
}

pub fn report_json(report: &FairnessReport) -> String {
    // field order fixed by the struct definition
    serde_json::to_string_pretty(report).expect("report is plain data")
}

pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,fair_loss,val_loss,val_acc,val_dp\n");
    for r in &history.records {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            r.fair_loss,
            r.val_loss,
            opt(r.val_acc),
            opt(r.val_dp)
        );
    }
    out
}

/// `{check_id, status, measured, threshold}` entries, pass/fail as strings.
pub fn verify_json(report: &VerifyReport) -> String {
    let entries: Vec<serde_json::Value> = report
        .checks
        .iter()
        .map(|c| {
            serde_json::json!({
                "check_id": c.check_id,
                "status": if c.pass { "pass" } else { "fail" },
                "measured": c.measured,
                "threshold": c.threshold,
            })
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("plain data")
}

pub fn pareto_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("lambda,fairness,acc\n");
    for (lambda, fairness, acc) in rows {
        let _ = writeln!(out, "{lambda},{fairness},{acc}");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::user(format!("cannot write `{}`: {e}", path.display())))
}
