//! Resolved run configuration: an optional TOML file overridden by CLI
//! flags (flags win), the dataset source, and the output layout. Every run
//! writes into a directory named by a hash of its resolved configuration.

use std::path::{Path, PathBuf};

use fairrep_core::ipm::FairnessTarget;
use fairrep_core::model::HeadArch;
use fairrep_core::optim::{OptimizerConfig, OptimizerKind};
use fairrep_core::train::{TrainConfig, TrainMode};
use serde::Deserialize;

use crate::args::Args;
use crate::checkpoint::SelectPolicy;
use crate::{CliError, CliResult};

/// Where the dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Cache(PathBuf),
    Csv {
        path: PathBuf,
        /// Optional second file appended as a fixed test partition.
        test_path: Option<PathBuf>,
        /// Built-in spec name or a TOML path.
        preprocess: String,
        test_frac: f64,
        val_frac: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DataSource,
    pub out_dir: PathBuf,
    /// `None` follows the mode default (standardize only unsupervised runs).
    pub standardize: Option<bool>,
    /// Which epoch's parameters the run keeps. Supervised runs default to
    /// the final iterate; unsupervised encoders default to the minimum
    /// validation loss.
    pub select: SelectPolicy,
    pub lambdas: Vec<f64>,
    pub archs: Vec<HeadArch>,
    pub downstream_epochs: usize,
    pub force: bool,
}

#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    train: Option<FileTrain>,
    data: Option<FileData>,
    output: Option<FileOutput>,
    sweep: Option<FileSweep>,
    downstream: Option<FileDownstream>,
}

#[derive(Debug, Default, Deserialize)]
struct FileTrain {
    mode: Option<String>,
    lambda: Option<f64>,
    epochs: Option<usize>,
    t_adv: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    lr_adv: Option<f64>,
    optimizer: Option<String>,
    rho: Option<f64>,
    eps: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    fairness_target: Option<String>,
    include_s: Option<bool>,
    seed: Option<u64>,
    m: Option<usize>,
    head_arch: Option<String>,
    slope: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct FileData {
    cache: Option<String>,
    csv: Option<String>,
    csv_test: Option<String>,
    preprocess: Option<String>,
    standardize: Option<bool>,
    test_frac: Option<f64>,
    val_frac: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct FileOutput {
    dir: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct FileSweep {
    lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
struct FileDownstream {
    archs: Option<Vec<String>>,
    epochs: Option<usize>,
}

fn parse_mode(s: &str) -> CliResult<TrainMode> {
    match s {
        "sup" => Ok(TrainMode::Sup),
        "unsup" => Ok(TrainMode::Unsup),
        other => Err(CliError::user(format!(
            "mode must be sup or unsup, got `{other}`"
        ))),
    }
}

fn parse_target(s: &str) -> CliResult<FairnessTarget> {
    match s {
        "dp" => Ok(FairnessTarget::Dp),
        "eopp" => Ok(FairnessTarget::EOpp),
        "eo" => Ok(FairnessTarget::Eo),
        other => Err(CliError::user(format!(
            "fairness-target must be dp, eopp, or eo, got `{other}`"
        ))),
    }
}

fn parse_optimizer(s: &str) -> CliResult<OptimizerKind> {
    match s {
        "adadelta" => Ok(OptimizerKind::Adadelta),
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        other => Err(CliError::user(format!(
            "optimizer must be adadelta, adam, or sgd, got `{other}`"
        ))),
    }
}

pub fn parse_arch(s: &str) -> CliResult<HeadArch> {
    HeadArch::parse(s).ok_or_else(|| {
        CliError::user(format!(
            "unknown arch `{s}`; valid: linear, leakyrelu1, sigmoid1, sigmoid2"
        ))
    })
}

impl RunConfig {
    /// Merge the optional `--config` TOML with flag overrides.
    pub fn resolve(args: &Args) -> CliResult<RunConfig> {
        let file: FileConfig = match args.get("config") {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::user(format!("config `{path}`: {e}")))?;
                toml::from_str(&text).map_err(|e| CliError::user(format!("config: {e}")))?
            }
            None => FileConfig::default(),
        };
        let ft = file.train.unwrap_or_default();
        let fd = file.data.unwrap_or_default();

        let mode = match args.get("mode").map(str::to_string).or(ft.mode) {
            Some(s) => parse_mode(&s)?,
            None => TrainMode::Sup,
        };
        let m = args.get_usize("m")?.or(ft.m).unwrap_or(8);
        let seed = args.get_u64("seed")?.or(ft.seed).unwrap_or(0);
        let mut cfg = match mode {
            TrainMode::Sup => TrainConfig::supervised(m, seed),
            TrainMode::Unsup => TrainConfig::unsupervised(m, seed),
        };
        if let Some(v) = args.get_f64("lambda")?.or(ft.lambda) {
            cfg.lambda = v;
        }
        if let Some(v) = args.get_usize("epochs")?.or(ft.epochs) {
            cfg.epochs = v;
        }
        if let Some(v) = args.get_usize("t-adv")?.or(ft.t_adv) {
            cfg.t_adv = v;
        }
        if let Some(v) = args.get_usize("batch-size")?.or(ft.batch_size) {
            cfg.batch_size = v;
        }
        let kind = match args.get("optimizer").map(str::to_string).or(ft.optimizer) {
            Some(s) => parse_optimizer(&s)?,
            None => OptimizerKind::Adadelta,
        };
        let lr = args.get_f64("lr")?.or(ft.lr).unwrap_or(2.0);
        let mut opt = match kind {
            OptimizerKind::Adadelta => OptimizerConfig::adadelta(lr),
            OptimizerKind::Adam => OptimizerConfig::adam(lr),
            OptimizerKind::Sgd => OptimizerConfig::sgd(lr),
        };
        if let Some(v) = args.get_f64("rho")?.or(ft.rho) {
            opt.rho = v;
        }
        if let Some(v) = args.get_f64("eps")?.or(ft.eps) {
            opt.eps = v;
        }
        if let Some(v) = args.get_f64("beta1")?.or(ft.beta1) {
            opt.beta1 = v;
        }
        if let Some(v) = args.get_f64("beta2")?.or(ft.beta2) {
            opt.beta2 = v;
        }
        cfg.optimizer = opt;
        cfg.lr_adv = args.get_f64("lr-adv")?.or(ft.lr_adv);
        if let Some(s) = args
            .get("fairness-target")
            .map(str::to_string)
            .or(ft.fairness_target)
        {
            cfg.fairness_target = parse_target(&s)?;
        }
        if let Some(v) = args.get_bool("include-s")?.or(ft.include_s) {
            cfg.include_s = v;
        }
        if let Some(s) = args.get("head-arch").map(str::to_string).or(ft.head_arch) {
            cfg.head_arch = parse_arch(&s)?;
        }
        if let Some(v) = args.get_f64("slope")?.or(ft.slope) {
            cfg.slope = v;
        }

        let data = if let Some(path) = args.get("data").map(str::to_string).or(fd.cache) {
            DataSource::Cache(PathBuf::from(path))
        } else if let Some(csv) = args.get("csv").map(str::to_string).or(fd.csv) {
            DataSource::Csv {
                path: PathBuf::from(csv),
                test_path: args
                    .get("csv-test")
                    .map(str::to_string)
                    .or(fd.csv_test)
                    .map(PathBuf::from),
                preprocess: args
                    .get("preprocess")
                    .map(str::to_string)
                    .or(fd.preprocess)
                    .ok_or_else(|| {
                        CliError::user("--csv needs --preprocess (adult, compas, or a TOML path)")
                    })?,
                test_frac: args.get_f64("test-frac")?.or(fd.test_frac).unwrap_or(0.3),
                val_frac: args.get_f64("val-frac")?.or(fd.val_frac).unwrap_or(0.2),
            }
        } else {
            return Err(CliError::user(
                "no dataset: pass --data <cache> or --csv <file> --preprocess <spec>",
            ));
        };

        let standardize = if args.has("standardize") {
            Some(true)
        } else if args.has("no-standardize") {
            Some(false)
        } else {
            fd.standardize
        };

        let out_dir = PathBuf::from(
            args.get("out")
                .map(str::to_string)
                .or(file.output.unwrap_or_default().dir)
                .unwrap_or_else(|| "runs".to_string()),
        );

        let lambdas = args
            .get_f64_list("lambdas")?
            .or(file.sweep.unwrap_or_default().lambdas)
            .unwrap_or_default();

        let fds = file.downstream.unwrap_or_default();
        let archs: Vec<HeadArch> = match args.get_str_list("archs").or(fds.archs) {
            Some(names) => names
                .iter()
                .map(|n| parse_arch(n))
                .collect::<CliResult<_>>()?,
            None => vec![HeadArch::LeakyRelu1],
        };
        let downstream_epochs = args
            .get_usize("downstream-epochs")?
            .or(fds.epochs)
            .unwrap_or(100);

        let select = match args.get("select") {
            Some(s) => SelectPolicy::parse(s).ok_or_else(|| {
                CliError::user(format!(
                    "--select must be final, acc-minus-dp, or min-val-loss, got `{s}`"
                ))
            })?,
            None => match mode {
                TrainMode::Sup => SelectPolicy::Final,
                TrainMode::Unsup => SelectPolicy::MinValLoss,
            },
        };

        Ok(RunConfig {
            train: cfg,
            data,
            out_dir,
            standardize,
            select,
            lambdas,
            archs,
            downstream_epochs,
            force: args.has("force"),
        })
    }

    /// Standardization default: only unsupervised runs, unless overridden.
    pub fn should_standardize(&self) -> bool {
        self.standardize
            .unwrap_or(self.train.mode == TrainMode::Unsup)
    }

    /// Stable fingerprint of everything that affects the run's outputs.
    pub fn run_hash(&self) -> String {
        let mut text = format!(
            "{:?}|{:?}|std={}|sel={:?}",
            self.train,
            self.data,
            self.should_standardize(),
            self.select
        );
        text.push_str(&format!("|ds={}ep", self.downstream_epochs));
        fnv1a_hex(text.as_bytes())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(format!("run-{}", self.run_hash()))
    }
}

/// 64-bit FNV-1a, hex-encoded.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Refuse to reuse a populated run directory unless forced.
pub fn claim_run_dir(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)
            .map(|mut it| it.next().is_some())
            .unwrap_or(false);
        if occupied && !force {
            return Err(CliError::user(format!(
                "run directory `{}` already has artifacts; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::user(format!("cannot create `{}`: {e}", dir.display())))?;
    Ok(())
}
