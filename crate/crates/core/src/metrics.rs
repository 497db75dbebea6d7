//! Fairness and accuracy measures over scored batches, plus Pareto-front
//! extraction for (fairness, accuracy) result sets.
//!
//! Four demographic-parity measures are provided. With the model's raw logit
//! written `l` and its score `sigmoid(l)`:
//! - `delta_dp`: gap in positive-prediction rates at threshold logit 0;
//! - `delta_mdp`: gap in mean scores (sigmoid squash by default, identity
//!   available);
//! - `delta_sdp`: rate gap averaged over a uniform grid of score thresholds;
//! - `delta_vdp`: gap in score variances (population variance).
//!
//! EOpp restricts a gap to the `y = 0` stratum; EO sums the per-stratum gaps.

use alloc::vec::Vec;
use core::fmt;

use crate::func::sigmoid;
use crate::ipm::FairnessTarget;
use crate::math;

/// Model outputs paired with group and (optionally) label information.
#[derive(Debug, Clone)]
pub struct ScoredBatch {
    pub logits: Vec<f64>,
    pub s: Vec<u8>,
    pub y: Option<Vec<u8>>,
}

impl ScoredBatch {
    pub fn new(logits: Vec<f64>, s: Vec<u8>, y: Option<Vec<u8>>) -> Result<Self, MetricError> {
        if s.len() != logits.len() || y.as_ref().is_some_and(|y| y.len() != logits.len()) {
            return Err(MetricError::LengthMismatch);
        }
        Ok(ScoredBatch { logits, s, y })
    }

    fn group_scores(&self, squash: Squash) -> (Vec<f64>, Vec<f64>) {
        let mut g0 = Vec::new();
        let mut g1 = Vec::new();
        for (&l, &s) in self.logits.iter().zip(&self.s) {
            let v = squash.apply(l);
            if s == 0 {
                g0.push(v);
            } else {
                g1.push(v);
            }
        }
        (g0, g1)
    }

    fn restrict(&self, keep: impl Fn(usize) -> bool) -> ScoredBatch {
        let mut logits = Vec::new();
        let mut s = Vec::new();
        let mut y = self.y.as_ref().map(|_| Vec::new());
        for i in 0..self.logits.len() {
            if keep(i) {
                logits.push(self.logits[i]);
                s.push(self.s[i]);
                if let (Some(dst), Some(src)) = (y.as_mut(), self.y.as_ref()) {
                    dst.push(src[i]);
                }
            }
        }
        ScoredBatch { logits, s, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricError {
    LengthMismatch,
    EmptyGroup,
    MissingLabels,
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::LengthMismatch => write!(f, "vector lengths disagree"),
            MetricError::EmptyGroup => write!(f, "a sensitive group or stratum is empty"),
            MetricError::MissingLabels => write!(f, "labels required for this metric"),
        }
    }
}

/// How a raw logit becomes a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Squash {
    Identity,
    Sigmoid,
}

impl Squash {
    #[inline]
    fn apply(self, logit: f64) -> f64 {
        match self {
            Squash::Identity => logit,
            Squash::Sigmoid => sigmoid(logit),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn population_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn check_groups(g0: &[f64], g1: &[f64]) -> Result<(), MetricError> {
    if g0.is_empty() || g1.is_empty() {
        Err(MetricError::EmptyGroup)
    } else {
        Ok(())
    }
}

/// `|P(logit > 0 | S=0) - P(logit > 0 | S=1)|`.
pub fn delta_dp(batch: &ScoredBatch) -> Result<f64, MetricError> {
    let (g0, g1) = batch.group_scores(Squash::Identity);
    check_groups(&g0, &g1)?;
    let rate = |g: &[f64]| g.iter().filter(|&&l| l > 0.0).count() as f64 / g.len() as f64;
    Ok(math::fabs(rate(&g0) - rate(&g1)))
}

/// `|E(score | S=0) - E(score | S=1)|` under the chosen squash.
pub fn delta_mdp(batch: &ScoredBatch, squash: Squash) -> Result<f64, MetricError> {
    let (g0, g1) = batch.group_scores(squash);
    check_groups(&g0, &g1)?;
    Ok(math::fabs(mean(&g0) - mean(&g1)))
}

/// Rate gap averaged over score thresholds `k / (grid + 1)`, `k = 1..=grid`,
/// applied to sigmoid scores. The default grid is 99 interior thresholds.
pub fn delta_sdp(batch: &ScoredBatch, grid: usize) -> Result<f64, MetricError> {
    let (g0, g1) = batch.group_scores(Squash::Sigmoid);
    check_groups(&g0, &g1)?;
    let mut acc = 0.0;
    for k in 1..=grid {
        let tau = k as f64 / (grid + 1) as f64;
        let rate = |g: &[f64]| g.iter().filter(|&&v| v > tau).count() as f64 / g.len() as f64;
        acc += math::fabs(rate(&g0) - rate(&g1));
    }
    Ok(acc / grid as f64)
}

pub const SDP_DEFAULT_GRID: usize = 99;

/// `|Var(score | S=0) - Var(score | S=1)|` with population variance on raw
/// model outputs.
pub fn delta_vdp(batch: &ScoredBatch) -> Result<f64, MetricError> {
    let (g0, g1) = batch.group_scores(Squash::Identity);
    check_groups(&g0, &g1)?;
    Ok(math::fabs(
        population_variance(&g0) - population_variance(&g1),
    ))
}

/// The gap measure to condition in [`group_conditional_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerMetric {
    Dp,
    Mdp(Squash),
    Sdp(usize),
    Vdp,
}

fn eval_inner(batch: &ScoredBatch, inner: InnerMetric) -> Result<f64, MetricError> {
    match inner {
        InnerMetric::Dp => delta_dp(batch),
        InnerMetric::Mdp(sq) => delta_mdp(batch, sq),
        InnerMetric::Sdp(grid) => delta_sdp(batch, grid),
        InnerMetric::Vdp => delta_vdp(batch),
    }
}

/// Label-conditioned gaps: EOpp evaluates `inner` on the `y = 0` stratum,
/// EO sums it over both strata. DP just evaluates `inner` unconditionally.
pub fn group_conditional_gap(
    batch: &ScoredBatch,
    target: FairnessTarget,
    inner: InnerMetric,
) -> Result<f64, MetricError> {
    match target {
        FairnessTarget::Dp => eval_inner(batch, inner),
        FairnessTarget::EOpp => {
            let y = batch.y.as_ref().ok_or(MetricError::MissingLabels)?;
            eval_inner(&batch.restrict(|i| y[i] == 0), inner)
        }
        FairnessTarget::Eo => {
            let y = batch.y.as_ref().ok_or(MetricError::MissingLabels)?;
            let g0 = eval_inner(&batch.restrict(|i| y[i] == 0), inner)?;
            let g1 = eval_inner(&batch.restrict(|i| y[i] == 1), inner)?;
            Ok(g0 + g1)
        }
    }
}

/// Fraction of samples with `I(logit > 0) = y`.
pub fn accuracy(batch: &ScoredBatch) -> Result<f64, MetricError> {
    let y = batch.y.as_ref().ok_or(MetricError::MissingLabels)?;
    if batch.logits.is_empty() {
        return Err(MetricError::EmptyGroup);
    }
    let hits = batch
        .logits
        .iter()
        .zip(y)
        .filter(|&(&l, &yy)| (l > 0.0) == (yy == 1))
        .count();
    Ok(hits as f64 / batch.logits.len() as f64)
}

/// Accuracy plus the fairness-gap family for one scored batch. EOpp/EO use
/// the rate gap (threshold logit 0) as the inner measure. `mdp` squashes
/// through the sigmoid; `mdp_raw` is the same gap on raw logits. The
/// label-conditioned gaps come out NaN when the batch is missing one of
/// their strata (small splits of heavily skewed data).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FairnessReport {
    pub acc: f64,
    pub dp: f64,
    pub mdp: f64,
    pub sdp: f64,
    pub vdp: f64,
    pub eopp: f64,
    pub eo: f64,
    pub mdp_raw: f64,
}

impl FairnessReport {
    pub fn from_batch(batch: &ScoredBatch) -> Result<Self, MetricError> {
        let conditioned = |target| {
            match group_conditional_gap(batch, target, InnerMetric::Dp) {
                Ok(v) => Ok(v),
                Err(MetricError::EmptyGroup) => Ok(f64::NAN),
                Err(e) => Err(e),
            }
        };
        Ok(FairnessReport {
            acc: accuracy(batch)?,
            dp: delta_dp(batch)?,
            mdp: delta_mdp(batch, Squash::Sigmoid)?,
            sdp: delta_sdp(batch, SDP_DEFAULT_GRID)?,
            vdp: delta_vdp(batch)?,
            eopp: conditioned(FairnessTarget::EOpp)?,
            eo: conditioned(FairnessTarget::Eo)?,
            mdp_raw: delta_mdp(batch, Squash::Identity)?,
        })
    }
}

/// Indices of the points not dominated by any other, sorted by fairness
/// ascending (accuracy descending as tie-break). A point is dominated when
/// another has fairness no worse and accuracy no worse, one strictly.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut keep = Vec::new();
    for (i, &(fi, ai)) in points.iter().enumerate() {
        let dominated = points.iter().enumerate().any(|(j, &(fj, aj))| {
            j != i && fj <= fi && aj >= ai && (fj < fi || aj > ai)
        });
        if !dominated {
            keep.push(i);
        }
    }
    keep.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[b].1.total_cmp(&points[a].1))
    });
    keep
}

/// The non-dominated subset of `(fairness, accuracy)` points, sorted by
/// fairness ascending.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    pareto_indices(points).into_iter().map(|i| points[i]).collect()
}
