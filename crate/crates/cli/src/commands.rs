//! The six subcommands: train, sweep, downstream, verify, synth, report.

use std::path::{Path, PathBuf};

use fairrep_core::dataset::{
    generate_synthetic, split, standardize, Dataset, SplitScheme, SplitTag, SynthSpec,
};
use fairrep_core::metrics::{pareto_indices, FairnessReport, ScoredBatch};
use fairrep_core::model::{encode, head_logits, EncoderParams, HeadParams};
use fairrep_core::theory::verify_suite_with;
use fairrep_core::train::{
    select_checkpoint, train_downstream, train_supervised, train_unsupervised, SelectCriterion,
    TrainConfig, TrainHistory, TrainMode,
};
use serde_json::json;

use crate::args::Args;
use crate::checkpoint::{self, Checkpoint, FORMAT_VERSION};
use crate::report::{history_csv, pareto_csv, report_csv, report_json, verify_json, write_text};
use crate::runcfg::{claim_run_dir, fnv1a_hex, parse_arch, DataSource, RunConfig};
use crate::table::{load_csv, preprocess, PreprocessSpec};
use crate::{cache, CliError, CliResult};

fn load_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    let mut dataset = match &cfg.data {
        DataSource::Cache(path) => cache::load(path)?,
        DataSource::Csv {
            path,
            test_path,
            preprocess: spec_name,
            test_frac,
            val_frac,
        } => {
            let spec = PreprocessSpec::resolve(spec_name)?;
            let mut table = load_csv(path).map_err(|e| {
                CliError::user(format!("dataset `{}`: {e}", path.display()))
            })?;
            let scheme = match test_path {
                Some(tp) => {
                    let test_table = load_csv(tp).map_err(|e| {
                        CliError::user(format!("dataset `{}`: {e}", tp.display()))
                    })?;
                    if test_table.columns != table.columns {
                        return Err(CliError::user(
                            "train and test CSV files have different columns",
                        ));
                    }
                    let train_rows = table.rows();
                    table.cells.extend(test_table.cells);
                    // surviving row order is preserved, so the number of
                    // surviving train-file rows marks the test boundary
                    let (ds_probe, report) = preprocess(&table, &spec)?;
                    let test_start = report
                        .surviving_rows
                        .iter()
                        .filter(|&&i| i < train_rows)
                        .count();
                    eprintln!(
                        "preprocessed: {} rows, d = {} ({} missing dropped, {} filtered)",
                        ds_probe.len(),
                        ds_probe.dim(),
                        report.dropped_missing_rows,
                        report.filtered_rows
                    );
                    let mut ds = ds_probe;
                    split(
                        &mut ds,
                        SplitScheme::FixedTest {
                            test_start,
                            val_frac: *val_frac,
                        },
                        cfg.train.seed,
                    )
                    .map_err(|e| CliError::user(format!("split: {e}")))?;
                    return finish_dataset(cfg, ds);
                }
                None => SplitScheme::Random {
                    train_frac: (1.0 - test_frac) * (1.0 - val_frac),
                    val_frac: (1.0 - test_frac) * val_frac,
                },
            };
            let (mut ds, report) = preprocess(&table, &spec)?;
            eprintln!(
                "preprocessed: {} rows, d = {} ({} missing dropped, {} filtered)",
                ds.len(),
                ds.dim(),
                report.dropped_missing_rows,
                report.filtered_rows
            );
            split(&mut ds, scheme, cfg.train.seed)
                .map_err(|e| CliError::user(format!("split: {e}")))?;
            ds
        }
    };
    if cfg.should_standardize() && dataset.standardization.is_none() {
        dataset = standardize(&dataset).map_err(|e| CliError::user(format!("{e}")))?;
    }
    Ok(dataset)
}

fn finish_dataset(cfg: &RunConfig, mut dataset: Dataset) -> CliResult<Dataset> {
    if cfg.should_standardize() && dataset.standardization.is_none() {
        dataset = standardize(&dataset).map_err(|e| CliError::user(format!("{e}")))?;
    }
    Ok(dataset)
}

/// Fairness report of a head on one split of the data.
fn evaluate(
    enc: &EncoderParams,
    head: &HeadParams,
    dataset: &Dataset,
    include_s: bool,
    tag: SplitTag,
) -> CliResult<FairnessReport> {
    let (x, s, y) = dataset.part(tag);
    let z = encode(enc, &x, &s, include_s).map_err(CliError::user)?;
    let logits = head_logits(head, &z).map_err(CliError::user)?;
    let scored =
        ScoredBatch::new(logits, s, Some(y)).map_err(|e| CliError::user(format!("{e}")))?;
    FairnessReport::from_batch(&scored).map_err(|e| CliError::user(format!("{e}")))
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
    pub report: FairnessReport,
}

/// One full training run: fit, keep the parameters the selection policy
/// asks for, evaluate on the test split. Unsupervised runs fit the
/// configured head downstream on the frozen kept encoder to produce the
/// report.
pub fn run_training(cfg: &RunConfig, dataset: &Dataset) -> CliResult<TrainOutcome> {
    let train_err = |e: fairrep_core::train::TrainError| CliError::user(format!("train: {e}"));
    match cfg.train.mode {
        TrainMode::Sup => {
            let (final_enc, final_head, history) =
                train_supervised(dataset, &cfg.train).map_err(train_err)?;
            let (epoch, enc, head) = match cfg.select.criterion() {
                None => (cfg.train.epochs - 1, final_enc, final_head),
                Some(criterion) => {
                    let (epoch, snap) =
                        select_checkpoint(&history, criterion).map_err(train_err)?;
                    (
                        epoch,
                        snap.enc.clone().expect("supervised snapshot has encoder"),
                        snap.head.clone().expect("supervised snapshot has head"),
                    )
                }
            };
            let report = evaluate(&enc, &head, dataset, cfg.train.include_s, SplitTag::Test)?;
            Ok(TrainOutcome {
                checkpoint: Checkpoint {
                    format_version: FORMAT_VERSION,
                    config: cfg.train.clone(),
                    selected_epoch: epoch,
                    policy: cfg.select,
                    encoder: enc,
                    head: Some(head),
                    decoder: None,
                },
                history,
                report,
            })
        }
        TrainMode::Unsup => {
            let (final_enc, final_dec, history) =
                train_unsupervised(dataset, &cfg.train).map_err(train_err)?;
            let (epoch, enc, dec) = match cfg.select.criterion() {
                None => (cfg.train.epochs - 1, final_enc, final_dec),
                Some(criterion) => {
                    let (epoch, snap) =
                        select_checkpoint(&history, criterion).map_err(train_err)?;
                    (
                        epoch,
                        snap.enc.clone().expect("unsupervised snapshot has encoder"),
                        snap.dec.clone().expect("unsupervised snapshot has decoder"),
                    )
                }
            };
            let mut head_cfg = cfg.train.clone();
            head_cfg.epochs = cfg.downstream_epochs;
            head_cfg.lambda = 0.0;
            let (_, head_hist) =
                train_downstream(&enc, dataset, cfg.train.head_arch, &head_cfg)
                    .map_err(train_err)?;
            let (_, head_snap) =
                select_checkpoint(&head_hist, SelectCriterion::MinValLoss).map_err(train_err)?;
            let head = head_snap.head.clone().expect("downstream snapshot has head");
            let report = evaluate(&enc, &head, dataset, cfg.train.include_s, SplitTag::Test)?;
            Ok(TrainOutcome {
                checkpoint: Checkpoint {
                    format_version: FORMAT_VERSION,
                    config: cfg.train.clone(),
                    selected_epoch: epoch,
                    policy: cfg.select,
                    encoder: enc,
                    head: Some(head),
                    decoder: Some(dec),
                },
                history,
                report,
            })
        }
    }
}

fn write_run_artifacts(dir: &Path, outcome: &TrainOutcome, cfg: &RunConfig) -> CliResult<()> {
    checkpoint::save(&outcome.checkpoint, &dir.join("checkpoint.json"))?;
    write_text(&dir.join("history.csv"), &history_csv(&outcome.history))?;
    write_text(&dir.join("report.json"), &report_json(&outcome.report))?;
    write_text(&dir.join("report.csv"), &report_csv(&outcome.report))?;
    let run_meta = json!({
        "hash": cfg.run_hash(),
        "mode": match cfg.train.mode { TrainMode::Sup => "sup", TrainMode::Unsup => "unsup" },
        "lambda": cfg.train.lambda,
        "seed": cfg.train.seed,
        "selected_epoch": outcome.checkpoint.selected_epoch,
        "empty_group_batches": outcome.history.empty_group_batches,
    });
    write_text(
        &dir.join("run.json"),
        &serde_json::to_string_pretty(&run_meta).expect("plain data"),
    )?;
    Ok(())
}

pub fn cmd_train(args: &Args) -> CliResult<()> {
    let cfg = RunConfig::resolve(args)?;
    let dataset = load_dataset(&cfg)?;
    let dir = cfg.run_dir();
    claim_run_dir(&dir, cfg.force)?;
    let outcome = run_training(&cfg, &dataset)?;
    write_run_artifacts(&dir, &outcome, &cfg)?;
    println!(
        "run {} -> acc {:.4}, dp {:.4} ({} epochs, selected {})",
        dir.display(),
        outcome.report.acc,
        outcome.report.dp,
        cfg.train.epochs,
        outcome.checkpoint.selected_epoch
    );
    Ok(())
}

pub fn cmd_sweep(args: &Args) -> CliResult<()> {
    let base = RunConfig::resolve(args)?;
    if base.lambdas.is_empty() {
        return Err(CliError::user(
            "sweep needs --lambdas (or [sweep] lambdas in the config)",
        ));
    }
    // sorted, deduplicated by lambda value; seeds derive from the stable
    // index in this ordering
    let mut lambdas = base.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let dataset = load_dataset(&base)?;

    let runs: Vec<RunConfig> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let mut cfg = base.clone();
            cfg.train.lambda = lambda;
            cfg.train.seed = base.train.seed + i as u64;
            cfg
        })
        .collect();

    let jobs = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let mut results: Vec<Option<TrainOutcome>> = Vec::new();
    for _ in 0..runs.len() {
        results.push(None);
    }
    std::thread::scope(|scope| {
        let mut pending: Vec<(usize, &RunConfig)> = runs.iter().enumerate().collect();
        while !pending.is_empty() {
            let chunk: Vec<(usize, &RunConfig)> =
                pending.drain(..pending.len().min(jobs)).collect();
            let handles: Vec<_> = chunk
                .into_iter()
                .map(|(i, cfg)| {
                    let ds = &dataset;
                    (i, scope.spawn(move || run_training(cfg, ds)))
                })
                .collect();
            for (i, handle) in handles {
                match handle.join() {
                    Ok(Ok(outcome)) => results[i] = Some(outcome),
                    Ok(Err(e)) => {
                        eprintln!("sweep: lambda {} failed: {e}", runs[i].train.lambda)
                    }
                    Err(_) => eprintln!("sweep: lambda {} panicked", runs[i].train.lambda),
                }
            }
        }
    });

    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (cfg, outcome) in runs.iter().zip(&results) {
        if let Some(outcome) = outcome {
            let dir = cfg.run_dir();
            claim_run_dir(&dir, cfg.force)?;
            write_run_artifacts(&dir, outcome, cfg)?;
            rows.push((cfg.train.lambda, outcome.report.dp, outcome.report.acc));
        }
    }
    if rows.is_empty() {
        return Err(CliError::failure("sweep: every run failed"));
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|&(_, f, a)| (f, a)).collect();
    let front: Vec<(f64, f64, f64)> = pareto_indices(&points)
        .into_iter()
        .map(|i| rows[i])
        .collect();
    let sweep_dir = base.out_dir.join(format!(
        "sweep-{}",
        fnv1a_hex(format!("{lambdas:?}|{}", base.run_hash()).as_bytes())
    ));
    claim_run_dir(&sweep_dir, base.force)?;
    write_text(&sweep_dir.join("pareto.csv"), &pareto_csv(&front))?;
    let all_rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|(l, f, a)| json!({"lambda": l, "dp": f, "acc": a}))
        .collect();
    write_text(
        &sweep_dir.join("sweep.json"),
        &serde_json::to_string_pretty(&all_rows).expect("plain data"),
    )?;
    println!(
        "sweep {} -> {} runs, {} on the front",
        sweep_dir.display(),
        rows.len(),
        front.len()
    );
    Ok(())
}

pub fn cmd_downstream(args: &Args) -> CliResult<()> {
    let ck_path = PathBuf::from(args.require("checkpoint")?);
    let ck = checkpoint::load(&ck_path)?;
    let arch_names = args
        .get_str_list("archs")
        .unwrap_or_else(|| vec!["linear".into(), "leakyrelu1".into(), "sigmoid1".into(), "sigmoid2".into()]);
    let archs = arch_names
        .iter()
        .map(|n| parse_arch(n))
        .collect::<CliResult<Vec<_>>>()?;

    // reuse the checkpoint's data handling: same mode (standardization
    // default), same split seed, same sensitive-bit handling
    let mut cfg = RunConfig::resolve(args)?;
    cfg.train.mode = ck.config.mode;
    cfg.train.include_s = ck.config.include_s;
    cfg.train.seed = ck.config.seed;
    let dataset = load_dataset(&cfg)?;

    let mut head_cfg: TrainConfig = ck.config.clone();
    head_cfg.lambda = 0.0;
    head_cfg.epochs = args
        .get_usize("downstream-epochs")?
        .unwrap_or(cfg.downstream_epochs);
    if let Some(seed) = args.get_u64("seed")? {
        head_cfg.seed = seed;
    }

    let dir = cfg.out_dir.join(format!(
        "downstream-{}",
        fnv1a_hex(format!("{ck_path:?}|{arch_names:?}|{}", head_cfg.seed).as_bytes())
    ));
    claim_run_dir(&dir, cfg.force)?;

    for arch in archs {
        let (_, hist) = train_downstream(&ck.encoder, &dataset, arch, &head_cfg)
            .map_err(|e| CliError::user(format!("downstream {}: {e}", arch.name())))?;
        let (_, snap) = select_checkpoint(&hist, SelectCriterion::MinValLoss)
            .map_err(|e| CliError::user(format!("{e}")))?;
        let head = snap.head.clone().expect("downstream snapshot has head");
        let report = evaluate(
            &ck.encoder,
            &head,
            &dataset,
            ck.config.include_s,
            SplitTag::Test,
        )?;
        write_text(
            &dir.join(format!("report-{}.json", arch.name())),
            &report_json(&report),
        )?;
        write_text(
            &dir.join(format!("report-{}.csv", arch.name())),
            &report_csv(&report),
        )?;
        println!(
            "{}: acc {:.4}, dp {:.4}",
            arch.name(),
            report.acc,
            report.dp
        );
    }
    Ok(())
}

pub fn cmd_verify(args: &Args) -> CliResult<()> {
    let seed = args.get_u64("seed")?.unwrap_or(0);
    let report = verify_suite_with(seed, args.has("inject-failure"));
    let text = verify_json(&report);
    match args.get("out") {
        Some(path) => write_text(Path::new(path), &text)?,
        None => println!("{text}"),
    }
    for c in &report.checks {
        eprintln!(
            "{:32} {} (measured {:.3e}, threshold {:.3e})",
            c.check_id,
            if c.pass { "pass" } else { "FAIL" },
            c.measured,
            c.threshold
        );
    }
    if report.all_pass() {
        Ok(())
    } else {
        Err(CliError::failure("verification checks failed"))
    }
}

pub fn cmd_synth(args: &Args) -> CliResult<()> {
    let d = args.get_usize("d")?.unwrap_or(4);
    let spec = SynthSpec {
        n: args.get_usize("n")?.unwrap_or(8000),
        d,
        delta: args.get_f64("delta")?.unwrap_or(1.0),
        w: args
            .get_f64_list("w")?
            .unwrap_or_else(|| vec![1.0; d]),
        bias_s: args.get_f64("bias-s")?.unwrap_or(1.0),
        seed: args.get_u64("seed")?.unwrap_or(0),
    };
    let out = PathBuf::from(args.require("out")?);
    let (mut dataset, gt) =
        generate_synthetic(&spec).map_err(|e| CliError::user(format!("synth: {e}")))?;
    let train_frac = args.get_f64("train-frac")?.unwrap_or(0.6);
    let val_frac = args.get_f64("val-frac")?.unwrap_or(0.2);
    split(
        &mut dataset,
        SplitScheme::Random {
            train_frac,
            val_frac,
        },
        spec.seed,
    )
    .map_err(|e| CliError::user(format!("split: {e}")))?;
    cache::save(&dataset, &out)?;
    let gt_json = serde_json::to_string_pretty(&json!({
        "bayes_dp": gt.bayes_dp,
        "mc_draws": gt.mc_draws,
        "spec": {
            "n": spec.n, "d": spec.d, "delta": spec.delta,
            "w": spec.w, "bias_s": spec.bias_s, "seed": spec.seed,
        },
    }))
    .expect("plain data");
    let gt_path = match args.get("ground-truth") {
        Some(p) => PathBuf::from(p),
        None => out.with_extension("gt.json"),
    };
    write_text(&gt_path, &gt_json)?;
    println!(
        "synth {} rows, d = {}, Bayes dp {:.4} -> {}",
        spec.n,
        spec.d,
        gt.bayes_dp,
        out.display()
    );
    Ok(())
}

pub fn cmd_report(args: &Args) -> CliResult<()> {
    let ck = checkpoint::load(Path::new(args.require("checkpoint")?))?;
    let head = ck
        .head
        .clone()
        .ok_or_else(|| CliError::user("checkpoint has no prediction head"))?;
    let mut cfg = RunConfig::resolve(args)?;
    cfg.train.mode = ck.config.mode;
    cfg.train.include_s = ck.config.include_s;
    cfg.train.seed = ck.config.seed;
    let dataset = load_dataset(&cfg)?;
    let tag = match args.get("split").unwrap_or("test") {
        "train" => SplitTag::Train,
        "val" => SplitTag::Val,
        "test" => SplitTag::Test,
        other => return Err(CliError::user(format!("unknown split `{other}`"))),
    };
    let report = evaluate(&ck.encoder, &head, &dataset, ck.config.include_s, tag)?;
    match args.get("out") {
        Some(path) => {
            write_text(Path::new(path), &report_json(&report))?;
            let csv_path = Path::new(path).with_extension("csv");
            write_text(&csv_path, &report_csv(&report))?;
        }
        None => println!("{}", report_json(&report)),
    }
    Ok(())
}
