//! The adversarial training loops.
//!
//! Per mini-batch: the sigmoid discriminator (one per fairness stratum) is
//! lifted by `t_adv` plain gradient-ascent steps on the fair gap computed at
//! the current encoder, then the encoder and task parameters take one
//! optimizer step down `task_loss + lambda * sum(gaps)`. With `lambda = 0`
//! the fair path is skipped entirely (the adversary is initialized but never
//! consulted). A batch whose stratum lacks one of the groups contributes no
//! fair term and is counted.
//!
//! Everything is deterministic: one seed fixes parameter initialization,
//! batch order, and therefore the entire parameter trajectory.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::autodiff::{Tape, TapeError};
use crate::dataset::{Dataset, SplitTag};
use crate::func;
use crate::ipm::{ascend, Discriminator, FairnessTarget};
use crate::matrix::Matrix;
use crate::metrics::{accuracy, delta_dp, ScoredBatch};
use crate::model::{
    decoder_graph, encode, encoder_graph, encoder_input, head_graph, head_logits, DecoderParams,
    EncoderParams, HeadArch, HeadParams, DEFAULT_SLOPE,
};
use crate::optim::{update, OptState, OptimizerConfig};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TrainMode {
    Sup,
    Unsup,
}

/// Full specification of one training run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub lambda: f64,
    pub epochs: usize,
    pub t_adv: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Adversary step size; `None` uses the optimizer learning rate.
    pub lr_adv: Option<f64>,
    pub fairness_target: FairnessTarget,
    /// Concatenate the sensitive bit to the encoder input.
    pub include_s: bool,
    pub seed: u64,
    /// Representation dimension.
    pub m: usize,
    /// Supervised prediction head.
    pub head_arch: HeadArch,
    pub slope: f64,
    /// Record the ascent/descent event sequence in the history.
    pub log_steps: bool,
}

impl TrainConfig {
    /// Paper-style defaults: Adadelta at rate 2.0, batches of 512, two
    /// adversary updates per model update, 400 supervised epochs.
    pub fn supervised(m: usize, seed: u64) -> Self {
        TrainConfig {
            mode: TrainMode::Sup,
            lambda: 0.0,
            epochs: 400,
            t_adv: 2,
            batch_size: 512,
            optimizer: OptimizerConfig::adadelta(2.0),
            lr_adv: None,
            fairness_target: FairnessTarget::Dp,
            include_s: true,
            seed,
            m,
            head_arch: HeadArch::LeakyRelu1,
            slope: DEFAULT_SLOPE,
            log_steps: false,
        }
    }

    /// Unsupervised defaults: 300 epochs, otherwise as
    /// [`TrainConfig::supervised`].
    pub fn unsupervised(m: usize, seed: u64) -> Self {
        TrainConfig {
            mode: TrainMode::Unsup,
            epochs: 300,
            ..TrainConfig::supervised(m, seed)
        }
    }

    pub fn lr_adv(&self) -> f64 {
        self.lr_adv.unwrap_or(self.optimizer.learning_rate)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.lambda < 0.0 {
            return Err(TrainError::Config(String::from("lambda must be >= 0")));
        }
        if self.batch_size < 2 {
            return Err(TrainError::Config(String::from("batch_size must be >= 2")));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config(String::from("epochs must be >= 1")));
        }
        if self.m == 0 {
            return Err(TrainError::Config(String::from("m must be >= 1")));
        }
        self.optimizer
            .validate()
            .map_err(|e| TrainError::Config(String::from(e)))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainError {
    Config(String),
    WrongMode { expected: TrainMode },
    Data(String),
    Graph(String),
    EmptyHistory,
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Config(s) => write!(f, "bad config: {}", s),
            TrainError::WrongMode { expected } => {
                write!(f, "config mode must be {:?}", expected)
            }
            TrainError::Data(s) => write!(f, "data: {}", s),
            TrainError::Graph(s) => write!(f, "graph: {}", s),
            TrainError::EmptyHistory => write!(f, "history has no epochs"),
        }
    }
}

impl From<TapeError> for TrainError {
    fn from(e: TapeError) -> Self {
        TrainError::Graph(e.0)
    }
}

/// Metrics logged once per epoch. Validation accuracy and rate gap are only
/// defined when a prediction head is being trained.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean total objective over the epoch's batches.
    pub train_loss: f64,
    /// Mean post-ascent fair gap (sum over strata) over the epoch's batches.
    pub fair_loss: f64,
    pub val_loss: f64,
    pub val_acc: Option<f64>,
    pub val_dp: Option<f64>,
}

/// One checkpointed parameter set.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SnapshotParams {
    pub enc: Option<EncoderParams>,
    pub head: Option<HeadParams>,
    pub dec: Option<DecoderParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    AscendAdversary,
    DescendModel,
}

/// Per-epoch records plus the running-best checkpoints under both selection
/// criteria.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    best_acc_minus_dp: Option<(usize, f64, SnapshotParams)>,
    best_val_loss: Option<(usize, f64, SnapshotParams)>,
    /// Strata skipped because one group was missing from the mini-batch.
    pub empty_group_batches: usize,
    pub step_log: Vec<StepEvent>,
}

impl TrainHistory {
    fn observe(&mut self, record: EpochRecord, snapshot: SnapshotParams) {
        let epoch = record.epoch;
        if let (Some(acc), Some(dp)) = (record.val_acc, record.val_dp) {
            let score = acc - dp;
            // strict improvement keeps the earliest epoch on ties
            if self
                .best_acc_minus_dp
                .as_ref()
                .is_none_or(|(_, best, _)| score > *best)
            {
                self.best_acc_minus_dp = Some((epoch, score, snapshot.clone()));
            }
        }
        if self
            .best_val_loss
            .as_ref()
            .is_none_or(|(_, best, _)| record.val_loss < *best)
        {
            self.best_val_loss = Some((epoch, record.val_loss, snapshot));
        }
        self.records.push(record);
    }
}

/// Checkpoint-selection criterion: maximize `val_acc - val_dp` or minimize
/// validation loss. Ties keep the earliest epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SelectCriterion {
    AccMinusDp,
    MinValLoss,
}

/// The chosen epoch and its parameters.
pub fn select_checkpoint(
    history: &TrainHistory,
    criterion: SelectCriterion,
) -> Result<(usize, &SnapshotParams), TrainError> {
    if history.records.is_empty() {
        return Err(TrainError::EmptyHistory);
    }
    let slot = match criterion {
        SelectCriterion::AccMinusDp => &history.best_acc_minus_dp,
        SelectCriterion::MinValLoss => &history.best_val_loss,
    };
    slot.as_ref()
        .map(|(epoch, _, params)| (*epoch, params))
        .ok_or(TrainError::EmptyHistory)
}

/// What the task half of the objective is.
enum Task<'a> {
    Classify { head: &'a mut HeadParams },
    Reconstruct { dec: &'a mut DecoderParams },
}

struct FairState {
    discs: Vec<Discriminator>,
}

fn gather(ids: &[usize], v: &[u8]) -> Vec<u8> {
    ids.iter().map(|&i| v[i]).collect()
}

/// Number of discriminators the target needs.
fn n_strata(target: FairnessTarget) -> usize {
    match target {
        FairnessTarget::Dp | FairnessTarget::EOpp => 1,
        FairnessTarget::Eo => 2,
    }
}

/// Shared epoch loop. `task` decides the loss; everything else (fair term,
/// optimizer bookkeeping, history) is identical between the modes.
#[allow(clippy::too_many_arguments)]
fn run_epochs(
    cfg: &TrainConfig,
    enc: Option<&mut EncoderParams>,
    task: Task<'_>,
    fair: Option<&mut FairState>,
    x_tr: &Matrix,
    s_tr: &[u8],
    y_tr: &[u8],
    x_val: &Matrix,
    s_val: &[u8],
    y_val: &[u8],
    rng: &mut Rng,
) -> Result<TrainHistory, TrainError> {
    let mut history = TrainHistory::default();
    let n = x_tr.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let lr_adv = cfg.lr_adv();

    let mut enc = enc;
    let mut task = task;
    let mut fair = fair;

    // optimizer state per parameter matrix, in registration order
    let n_param_blocks = {
        let enc_blocks = if enc.is_some() { 2 } else { 0 };
        let task_blocks = match &task {
            Task::Classify { head } => head.layers.len() * 2,
            Task::Reconstruct { .. } => 2,
        };
        enc_blocks + task_blocks
    };
    let mut opt_states: Vec<OptState> = vec![OptState::Empty; n_param_blocks];

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut epoch_fair = 0.0;
        let mut n_batches = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let x_b = x_tr.select_rows(chunk);
            let s_b = gather(chunk, s_tr);
            let y_b = gather(chunk, y_tr);

            // ascent phase: lift each stratum's discriminator on the gap at
            // the current encoder
            let strata = crate::ipm::strata_row_indices(
                x_b.rows(),
                &s_b,
                &y_b,
                cfg.fairness_target,
            );
            if cfg.lambda > 0.0 {
                if let (Some(enc_ref), Some(fair_state)) = (enc.as_deref(), fair.as_deref_mut()) {
                    let z_det = encode(enc_ref, &x_b, &s_b, cfg.include_s)
                        .map_err(TrainError::Graph)?;
                    for (k, (rows0, rows1)) in strata.iter().enumerate() {
                        if rows0.is_empty() || rows1.is_empty() {
                            history.empty_group_batches += 1;
                            continue;
                        }
                        let gb = crate::ipm::GroupedBatch {
                            z0: z_det.select_rows(rows0),
                            z1: z_det.select_rows(rows1),
                        };
                        fair_state.discs[k] =
                            ascend(&fair_state.discs[k], &gb, lr_adv, cfg.t_adv)
                                .map_err(|e| TrainError::Data(alloc::format!("{}", e)))?;
                        if cfg.log_steps {
                            for _ in 0..cfg.t_adv {
                                history.step_log.push(StepEvent::AscendAdversary);
                            }
                        }
                    }
                }
            }

            // descent phase: one taped forward/backward of the full objective
            let mut tape = Tape::new();
            let (z_node, enc_layer) = match enc.as_deref() {
                Some(enc_ref) => {
                    let input = encoder_input(&x_b, &s_b, cfg.include_s)
                        .map_err(TrainError::Graph)?;
                    let input_node = tape.leaf(input);
                    let g = encoder_graph(&mut tape, enc_ref, input_node)?;
                    (g.z, Some(g.layer))
                }
                None => (tape.leaf(x_b.clone()), None),
            };

            let (task_node, task_layers) = match &task {
                Task::Classify { head } => {
                    let g = head_graph(&mut tape, head, z_node)?;
                    let labels: Vec<f64> = y_b.iter().map(|&v| v as f64).collect();
                    let loss = tape.bce_with_logits(g.logits, labels)?;
                    (loss, g.layers)
                }
                Task::Reconstruct { dec } => {
                    let g = decoder_graph(&mut tape, dec, z_node)?;
                    let loss = tape.squared_error(g.xhat, x_b.clone())?;
                    (loss, vec![g.layer])
                }
            };

            let mut total = task_node;
            let mut batch_fair = 0.0;
            if cfg.lambda > 0.0 {
                if let Some(fair_state) = fair.as_deref() {
                    for (k, (rows0, rows1)) in strata.iter().enumerate() {
                        if rows0.is_empty() || rows1.is_empty() {
                            continue;
                        }
                        let disc = &fair_state.discs[k];
                        let theta =
                            Matrix::from_vec(1, disc.theta.len(), disc.theta.clone()).unwrap();
                        let mu = Matrix::from_vec(1, 1, vec![disc.mu]).unwrap();
                        let tn = tape.leaf(theta);
                        let mn = tape.leaf(mu);
                        let mut group_mean = [f64::NAN; 2];
                        let mut nodes = [None, None];
                        for (gi, rows) in [rows0, rows1].into_iter().enumerate() {
                            let zg = tape.select_rows(z_node, rows.clone());
                            let proj = tape.affine(tn, mn, zg)?;
                            let resp = tape.sigmoid(proj);
                            let mean = tape.mean(resp);
                            group_mean[gi] = tape.scalar(mean);
                            nodes[gi] = Some(mean);
                        }
                        let diff = tape.sub(nodes[0].unwrap(), nodes[1].unwrap());
                        let gap = tape.abs(diff);
                        batch_fair += tape.scalar(gap);
                        total = tape.add_scaled(total, gap, cfg.lambda);
                    }
                }
            }

            let grads = tape.backward(total, 1.0);
            let mut block_idx = 0usize;
            if let (Some(enc_ref), Some(layer)) = (enc.as_deref_mut(), enc_layer) {
                update(
                    &mut enc_ref.w,
                    &grads[layer.w.index()],
                    &mut opt_states[block_idx],
                    &cfg.optimizer,
                );
                update(
                    &mut enc_ref.b,
                    &grads[layer.b.index()],
                    &mut opt_states[block_idx + 1],
                    &cfg.optimizer,
                );
                block_idx += 2;
            }
            match &mut task {
                Task::Classify { head } => {
                    for (layer, nodes) in head.layers.iter_mut().zip(&task_layers) {
                        update(
                            &mut layer.0,
                            &grads[nodes.w.index()],
                            &mut opt_states[block_idx],
                            &cfg.optimizer,
                        );
                        update(
                            &mut layer.1,
                            &grads[nodes.b.index()],
                            &mut opt_states[block_idx + 1],
                            &cfg.optimizer,
                        );
                        block_idx += 2;
                    }
                }
                Task::Reconstruct { dec } => {
                    let nodes = &task_layers[0];
                    update(
                        &mut dec.w,
                        &grads[nodes.w.index()],
                        &mut opt_states[block_idx],
                        &cfg.optimizer,
                    );
                    update(
                        &mut dec.b,
                        &grads[nodes.b.index()],
                        &mut opt_states[block_idx + 1],
                        &cfg.optimizer,
                    );
                }
            }
            if cfg.log_steps {
                history.step_log.push(StepEvent::DescendModel);
            }

            epoch_loss += tape.scalar(total);
            epoch_fair += batch_fair;
            n_batches += 1;
        }

        // validation pass with the post-update parameters
        let (val_loss, val_acc, val_dp, snapshot) = match (&task, enc.as_deref()) {
            (Task::Classify { head }, enc_opt) => {
                let z_val = match enc_opt {
                    Some(enc_ref) => encode(enc_ref, x_val, s_val, cfg.include_s)
                        .map_err(TrainError::Graph)?,
                    None => x_val.clone(),
                };
                let logits = head_logits(head, &z_val).map_err(TrainError::Graph)?;
                let labels: Vec<f64> = y_val.iter().map(|&v| v as f64).collect();
                let loss = func::bce_with_logits(&logits, &labels)
                    .map_err(|e| TrainError::Data(alloc::format!("{}", e)))?;
                let scored = ScoredBatch::new(logits, s_val.to_vec(), Some(y_val.to_vec()))
                    .map_err(|e| TrainError::Data(alloc::format!("{}", e)))?;
                let acc = accuracy(&scored).ok();
                let dp = delta_dp(&scored).ok();
                let snap = SnapshotParams {
                    enc: enc_opt.cloned(),
                    head: Some((*head).clone()),
                    dec: None,
                };
                (loss, acc, dp, snap)
            }
            (Task::Reconstruct { dec }, enc_opt) => {
                let enc_ref = enc_opt.expect("reconstruction always has an encoder");
                let z_val =
                    encode(enc_ref, x_val, s_val, cfg.include_s).map_err(TrainError::Graph)?;
                let xhat = crate::model::decode(dec, &z_val).map_err(TrainError::Graph)?;
                let loss = func::squared_error(x_val, &xhat)
                    .map_err(|e| TrainError::Data(alloc::format!("{}", e)))?;
                let snap = SnapshotParams {
                    enc: Some(enc_ref.clone()),
                    head: None,
                    dec: Some((*dec).clone()),
                };
                (loss, None, None, snap)
            }
        };

        history.observe(
            EpochRecord {
                epoch,
                train_loss: epoch_loss / n_batches.max(1) as f64,
                fair_loss: epoch_fair / n_batches.max(1) as f64,
                val_loss,
                val_acc,
                val_dp,
            },
            snapshot,
        );
    }
    Ok(history)
}

/// `(X, s, y)` of one split.
type SplitPart = (Matrix, Vec<u8>, Vec<u8>);

fn split_parts(data: &Dataset) -> Result<(SplitPart, SplitPart), TrainError> {
    let train = data.part(SplitTag::Train);
    let val = data.part(SplitTag::Val);
    if train.0.rows() == 0 {
        return Err(TrainError::Data(String::from("train split is empty")));
    }
    if val.0.rows() == 0 {
        return Err(TrainError::Data(String::from("validation split is empty")));
    }
    Ok((train, val))
}

/// Supervised run: encoder and prediction head trained jointly under
/// `cross_entropy + lambda * fair_gap`.
pub fn train_supervised(
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, HeadParams, TrainHistory), TrainError> {
    cfg.validate()?;
    if cfg.mode != TrainMode::Sup {
        return Err(TrainError::WrongMode {
            expected: TrainMode::Sup,
        });
    }
    let ((x_tr, s_tr, y_tr), (x_val, s_val, y_val)) = split_parts(data)?;
    let d_in = data.dim() + usize::from(cfg.include_s);
    let mut rng = Rng::derive(cfg.seed, 0);
    let mut enc = EncoderParams::init(cfg.m, d_in, cfg.slope, &mut rng);
    let mut head = HeadParams::init(cfg.head_arch, cfg.m, cfg.slope, &mut rng);
    let mut fair = FairState {
        discs: (0..n_strata(cfg.fairness_target))
            .map(|_| Discriminator::random(cfg.m, &mut rng))
            .collect(),
    };
    let history = run_epochs(
        cfg,
        Some(&mut enc),
        Task::Classify { head: &mut head },
        Some(&mut fair),
        &x_tr,
        &s_tr,
        &y_tr,
        &x_val,
        &s_val,
        &y_val,
        &mut rng,
    )?;
    Ok((enc, head, history))
}

/// Unsupervised run: encoder and decoder trained under
/// `reconstruction + lambda * fair_gap`; labels are untouched (they only
/// stratify EOpp/EO fair terms if so configured).
pub fn train_unsupervised(
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, DecoderParams, TrainHistory), TrainError> {
    cfg.validate()?;
    if cfg.mode != TrainMode::Unsup {
        return Err(TrainError::WrongMode {
            expected: TrainMode::Unsup,
        });
    }
    let ((x_tr, s_tr, y_tr), (x_val, s_val, y_val)) = split_parts(data)?;
    let d = data.dim();
    let d_in = d + usize::from(cfg.include_s);
    let mut rng = Rng::derive(cfg.seed, 0);
    let mut enc = EncoderParams::init(cfg.m, d_in, cfg.slope, &mut rng);
    let mut dec = DecoderParams::init(d, cfg.m, &mut rng);
    let mut fair = FairState {
        discs: (0..n_strata(cfg.fairness_target))
            .map(|_| Discriminator::random(cfg.m, &mut rng))
            .collect(),
    };
    let history = run_epochs(
        cfg,
        Some(&mut enc),
        Task::Reconstruct { dec: &mut dec },
        Some(&mut fair),
        &x_tr,
        &s_tr,
        &y_tr,
        &x_val,
        &s_val,
        &y_val,
        &mut rng,
    )?;
    Ok((enc, dec, history))
}

/// Downstream run: the encoder is frozen, its outputs are precomputed once,
/// and only the head trains (plain cross-entropy, no fair term).
pub fn train_downstream(
    enc: &EncoderParams,
    data: &Dataset,
    arch: HeadArch,
    cfg: &TrainConfig,
) -> Result<(HeadParams, TrainHistory), TrainError> {
    cfg.validate()?;
    let ((x_tr, s_tr, y_tr), (x_val, s_val, y_val)) = split_parts(data)?;
    let z_tr = encode(enc, &x_tr, &s_tr, cfg.include_s).map_err(TrainError::Graph)?;
    let z_val = encode(enc, &x_val, &s_val, cfg.include_s).map_err(TrainError::Graph)?;
    let mut rng = Rng::derive(cfg.seed, 0);
    let mut head = HeadParams::init(arch, enc.rep_dim(), cfg.slope, &mut rng);
    let head_cfg = TrainConfig {
        lambda: 0.0,
        ..cfg.clone()
    };
    let history = run_epochs(
        &head_cfg,
        None,
        Task::Classify { head: &mut head },
        None,
        &z_tr,
        &s_tr,
        &y_tr,
        &z_val,
        &s_val,
        &y_val,
        &mut rng,
    )?;
    Ok((head, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, split, SplitScheme, SynthSpec};
    use crate::ipm::{fair_gap, GroupedBatch};

    fn synth(n: usize, delta: f64, seed: u64) -> Dataset {
        let spec = SynthSpec {
            n,
            d: 3,
            delta,
            w: vec![1.0; 3],
            bias_s: 0.5,
            seed,
        };
        let (mut ds, _) = generate_synthetic(&spec).unwrap();
        split(
            &mut ds,
            SplitScheme::Random {
                train_frac: 0.6,
                val_frac: 0.2,
            },
            seed,
        )
        .unwrap();
        ds
    }

    fn quick_cfg(mode: TrainMode, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            mode,
            lambda,
            epochs: 3,
            t_adv: 2,
            batch_size: 32,
            optimizer: OptimizerConfig::adadelta(2.0),
            lr_adv: None,
            fairness_target: FairnessTarget::Dp,
            include_s: true,
            seed,
            m: 3,
            head_arch: HeadArch::LeakyRelu1,
            slope: DEFAULT_SLOPE,
            log_steps: false,
        }
    }

    #[test]
    fn supervised_is_deterministic() {
        let ds = synth(200, 0.5, 3);
        let cfg = quick_cfg(TrainMode::Sup, 1.0, 9);
        let (enc_a, head_a, hist_a) = train_supervised(&ds, &cfg).unwrap();
        let (enc_b, head_b, hist_b) = train_supervised(&ds, &cfg).unwrap();
        assert_eq!(enc_a, enc_b);
        assert_eq!(head_a, head_b);
        assert_eq!(hist_a.records, hist_b.records);
    }

    #[test]
    fn unsupervised_is_deterministic_and_ignores_labels() {
        let mut ds = synth(200, 0.5, 4);
        let cfg = quick_cfg(TrainMode::Unsup, 0.5, 2);
        let (enc_a, dec_a, hist_a) = train_unsupervised(&ds, &cfg).unwrap();
        // flipping labels must not change anything under the DP target
        for y in ds.y.iter_mut() {
            *y = 1 - *y;
        }
        let (enc_b, dec_b, hist_b) = train_unsupervised(&ds, &cfg).unwrap();
        assert_eq!(enc_a, enc_b);
        assert_eq!(dec_a, dec_b);
        assert_eq!(hist_a.records, hist_b.records);
    }

    #[test]
    fn reconstruction_loss_trends_down_without_fair_term() {
        // decoder width equals the data dimension, so the affine pair can
        // invert the encoder on well-conditioned data
        let mut rng = Rng::new(21);
        let n = 240;
        let d = 3;
        let x = Matrix::from_vec(n, d, rng.normal_vec(n * d)).unwrap();
        let s: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y = vec![0u8; n];
        let mut ds = Dataset::new(x, s, y).unwrap();
        split(
            &mut ds,
            SplitScheme::Random {
                train_frac: 0.6,
                val_frac: 0.2,
            },
            21,
        )
        .unwrap();
        let mut cfg = quick_cfg(TrainMode::Unsup, 0.0, 21);
        cfg.epochs = 30;
        cfg.include_s = false;
        let (_, _, hist) = train_unsupervised(&ds, &cfg).unwrap();
        let first = hist.records.first().unwrap().val_loss;
        let last = hist.records.last().unwrap().val_loss;
        assert!(last < 0.5 * first, "val loss {first} -> {last}");
        let increases = hist
            .records
            .windows(2)
            .filter(|w| w[1].val_loss > w[0].val_loss + 1e-9)
            .count();
        assert!(
            increases <= hist.records.len() / 5,
            "{increases} upticks in {} epochs",
            hist.records.len()
        );
    }

    #[test]
    fn heavy_fair_weight_shrinks_representation_gap() {
        let ds = synth(400, 1.0, 13);
        let run = |lambda: f64| {
            let mut cfg = quick_cfg(TrainMode::Unsup, lambda, 6);
            cfg.epochs = 15;
            cfg.m = 2;
            let (enc, _, _) = train_unsupervised(&ds, &cfg).unwrap();
            let (x_val, s_val, _) = ds.part(SplitTag::Val);
            let z = encode(&enc, &x_val, &s_val, cfg.include_s).unwrap();
            let rows0: Vec<usize> = (0..z.rows()).filter(|&i| s_val[i] == 0).collect();
            let rows1: Vec<usize> = (0..z.rows()).filter(|&i| s_val[i] == 1).collect();
            let gb = GroupedBatch {
                z0: z.select_rows(&rows0),
                z1: z.select_rows(&rows1),
            };
            crate::ipm::estimate_sipm(&gb, 8, 2.0, 100, 3).unwrap()
        };
        let fair = run(1e4);
        let unfair = run(0.0);
        assert!(fair < unfair, "sIPM {fair} !< {unfair}");
    }

    #[test]
    fn eo_training_keeps_one_adversary_per_stratum() {
        let ds = synth(120, 0.8, 17);
        let mut cfg = quick_cfg(TrainMode::Sup, 1.0, 2);
        cfg.fairness_target = FairnessTarget::Eo;
        cfg.log_steps = true;
        cfg.epochs = 1;
        cfg.batch_size = 120;
        let (_, _, hist) = train_supervised(&ds, &cfg).unwrap();
        // one batch: both strata ascend t_adv times each, then one descent
        let ascents = hist
            .step_log
            .iter()
            .filter(|e| **e == StepEvent::AscendAdversary)
            .count();
        assert_eq!(ascents, 2 * cfg.t_adv);
        assert_eq!(*hist.step_log.last().unwrap(), StepEvent::DescendModel);
    }

    #[test]
    fn lambda_zero_ignores_adversary_settings() {
        let ds = synth(150, 1.0, 5);
        let mut cfg = quick_cfg(TrainMode::Sup, 0.0, 7);
        let (enc_a, head_a, _) = train_supervised(&ds, &cfg).unwrap();
        cfg.t_adv = 17;
        cfg.lr_adv = Some(123.0);
        let (enc_b, head_b, _) = train_supervised(&ds, &cfg).unwrap();
        assert_eq!(enc_a, enc_b);
        assert_eq!(head_a, head_b);
    }

    #[test]
    fn step_log_shows_algorithm_order() {
        let ds = synth(100, 0.5, 6);
        let mut cfg = quick_cfg(TrainMode::Sup, 1.0, 1);
        cfg.log_steps = true;
        cfg.epochs = 1;
        cfg.batch_size = 50;
        let (_, _, hist) = train_supervised(&ds, &cfg).unwrap();
        // pattern per batch: t_adv ascents then one descent
        let mut i = 0;
        let log = &hist.step_log;
        assert!(!log.is_empty());
        while i < log.len() {
            let mut ascents = 0;
            while i < log.len() && log[i] == StepEvent::AscendAdversary {
                ascents += 1;
                i += 1;
            }
            assert_eq!(ascents, cfg.t_adv, "each descent preceded by t_adv ascents");
            assert_eq!(log[i], StepEvent::DescendModel);
            i += 1;
        }
    }

    #[test]
    fn recorded_fair_loss_matches_post_ascent_gap() {
        // single batch per epoch so the epoch mean is the batch value
        let ds = synth(60, 1.0, 8);
        let mut cfg = quick_cfg(TrainMode::Sup, 2.0, 3);
        cfg.batch_size = 60;
        cfg.epochs = 1;
        let (_, _, hist) = train_supervised(&ds, &cfg).unwrap();
        let recorded = hist.records[0].fair_loss;

        // replay: init params with the same streams and do the ascent by hand
        let d_in = ds.dim() + 1;
        let mut rng = Rng::derive(cfg.seed, 0);
        let enc = EncoderParams::init(cfg.m, d_in, cfg.slope, &mut rng);
        let _head = HeadParams::init(cfg.head_arch, cfg.m, cfg.slope, &mut rng);
        let disc0 = Discriminator::random(cfg.m, &mut rng);
        let (x_tr, s_tr, _) = ds.part(SplitTag::Train);
        let mut order: Vec<usize> = (0..x_tr.rows()).collect();
        rng.shuffle(&mut order);
        let x_b = x_tr.select_rows(&order);
        let s_b: Vec<u8> = order.iter().map(|&i| s_tr[i]).collect();
        let z = encode(&enc, &x_b, &s_b, cfg.include_s).unwrap();
        let rows0: Vec<usize> = (0..z.rows()).filter(|&i| s_b[i] == 0).collect();
        let rows1: Vec<usize> = (0..z.rows()).filter(|&i| s_b[i] == 1).collect();
        let gb = GroupedBatch {
            z0: z.select_rows(&rows0),
            z1: z.select_rows(&rows1),
        };
        let lifted = ascend(&disc0, &gb, cfg.lr_adv(), cfg.t_adv).unwrap();
        let expect = fair_gap(&lifted, &gb).unwrap();
        assert_eq!(recorded, expect);
    }

    #[test]
    fn checkpoint_selection_rules() {
        let mut hist = TrainHistory::default();
        let snap = SnapshotParams::default();
        for (epoch, acc, dp, vl) in [
            (0usize, 0.80, 0.10, 0.5),
            (1, 0.85, 0.20, 0.4),
            (2, 0.80, 0.10, 0.4), // ties epoch 0 on acc-dp, ties epoch 1 on loss
        ] {
            hist.observe(
                EpochRecord {
                    epoch,
                    train_loss: 1.0,
                    fair_loss: 0.0,
                    val_loss: vl,
                    val_acc: Some(acc),
                    val_dp: Some(dp),
                },
                snap.clone(),
            );
        }
        let (e, _) = select_checkpoint(&hist, SelectCriterion::AccMinusDp).unwrap();
        assert_eq!(e, 0, "0.70 beats 0.65; earliest tie wins");
        let (e, _) = select_checkpoint(&hist, SelectCriterion::MinValLoss).unwrap();
        assert_eq!(e, 1);
        let empty = TrainHistory::default();
        assert!(select_checkpoint(&empty, SelectCriterion::MinValLoss).is_err());
    }

    #[test]
    fn single_epoch_selects_that_epoch() {
        let ds = synth(80, 0.5, 2);
        let mut cfg = quick_cfg(TrainMode::Sup, 0.0, 4);
        cfg.epochs = 1;
        let (_, _, hist) = train_supervised(&ds, &cfg).unwrap();
        assert_eq!(
            select_checkpoint(&hist, SelectCriterion::AccMinusDp)
                .unwrap()
                .0,
            0
        );
    }

    #[test]
    fn downstream_zero_encoder_reaches_base_rate() {
        let ds = synth(300, 0.0, 12);
        let enc = EncoderParams {
            w: Matrix::zeros(3, 4),
            b: Matrix::zeros(3, 1),
            slope: DEFAULT_SLOPE,
        };
        let mut cfg = quick_cfg(TrainMode::Sup, 0.0, 5);
        cfg.epochs = 150;
        cfg.batch_size = 256;
        let (head, hist) = train_downstream(&enc, &ds, HeadArch::Linear, &cfg).unwrap();
        // constant-input logistic fit: optimal logit is ln(p / (1 - p)) on
        // the train split, accuracy equals the majority rate
        let (_, _, y_tr) = ds.part(SplitTag::Train);
        let p = y_tr.iter().map(|&v| v as f64).sum::<f64>() / y_tr.len() as f64;
        let target_logit = (p / (1.0 - p)).ln();
        let z = Matrix::zeros(1, 3);
        let logit = head_logits(&head, &z).unwrap()[0];
        assert!(
            (logit - target_logit).abs() < 0.05,
            "logit {logit} vs base-rate {target_logit}"
        );
        let (x_val, s_val, y_val) = ds.part(SplitTag::Val);
        let z_val = encode(&enc, &x_val, &s_val, true).unwrap();
        let logits = head_logits(&head, &z_val).unwrap();
        let scored = ScoredBatch::new(logits, s_val, Some(y_val.clone())).unwrap();
        let acc = accuracy(&scored).unwrap();
        let majority = {
            let pv = y_val.iter().map(|&v| v as f64).sum::<f64>() / y_val.len() as f64;
            pv.max(1.0 - pv)
        };
        assert!((acc - majority).abs() < 1e-12, "{acc} vs {majority}");
        let _ = hist;
    }

    #[test]
    fn downstream_deterministic_and_separable_data_fits() {
        // linearly separable representations: y = I(x_0 > 0)
        let mut rng = Rng::new(3);
        let n = 200;
        let data: Vec<f64> = (0..n * 2).map(|_| rng.normal()).collect();
        let x = Matrix::from_vec(n, 2, data).unwrap();
        let y: Vec<u8> = (0..n).map(|i| u8::from(x.at(i, 0) > 0.0)).collect();
        let s: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let mut ds = Dataset::new(x, s, y).unwrap();
        split(
            &mut ds,
            SplitScheme::Random {
                train_frac: 0.7,
                val_frac: 0.15,
            },
            2,
        )
        .unwrap();
        let enc = EncoderParams {
            w: Matrix::identity(2),
            b: Matrix::zeros(2, 1),
            slope: DEFAULT_SLOPE,
        };
        let mut cfg = quick_cfg(TrainMode::Sup, 0.0, 6);
        cfg.include_s = false;
        cfg.epochs = 1000;
        cfg.optimizer = OptimizerConfig::sgd(2.0);
        let (head_a, _) = train_downstream(&enc, &ds, HeadArch::Linear, &cfg).unwrap();
        let (head_b, _) = train_downstream(&enc, &ds, HeadArch::Linear, &cfg).unwrap();
        assert_eq!(head_a, head_b);
        let (x_tr, s_tr, y_tr) = ds.part(SplitTag::Train);
        let z = encode(&enc, &x_tr, &s_tr, false).unwrap();
        let logits = head_logits(&head_a, &z).unwrap();
        let scored = ScoredBatch::new(logits, s_tr, Some(y_tr)).unwrap();
        let acc = accuracy(&scored).unwrap();
        assert!(acc > 0.97, "training accuracy {acc}");
    }

    #[test]
    fn config_validation_errors() {
        let ds = synth(50, 0.0, 1);
        let mut cfg = quick_cfg(TrainMode::Sup, -1.0, 1);
        assert!(matches!(
            train_supervised(&ds, &cfg),
            Err(TrainError::Config(_))
        ));
        cfg.lambda = 0.0;
        cfg.mode = TrainMode::Unsup;
        assert!(matches!(
            train_supervised(&ds, &cfg),
            Err(TrainError::WrongMode { .. })
        ));
    }
}
