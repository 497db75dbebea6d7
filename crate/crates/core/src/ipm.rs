//! The sigmoid-IPM fairness deviance.
//!
//! The discriminator family is `{z -> sigmoid(theta' z + mu)}`. The deviance
//! between the two group-conditional representation distributions is the
//! supremum over that family of the absolute difference of group means,
//! estimated here three ways: directly on one discriminator ([`fair_gap`]),
//! by multi-restart gradient ascent ([`estimate_sipm`]), and by brute force
//! over a parameter grid ([`grid_oracle_sipm`]). The ascent estimator and
//! the grid oracle are independent routes to the same supremum; tests hold
//! them against each other.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::func::sigmoid;
use crate::math;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// A single sigmoid discriminator `z -> sigmoid(theta' z + mu)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Discriminator {
    pub theta: Vec<f64>,
    pub mu: f64,
}

impl Discriminator {
    pub fn zeros(m: usize) -> Self {
        Discriminator {
            theta: vec![0.0; m],
            mu: 0.0,
        }
    }

    /// Uniform(-1, 1) initialization for every coordinate.
    pub fn random(m: usize, rng: &mut Rng) -> Self {
        Discriminator {
            theta: (0..m).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            mu: rng.uniform(-1.0, 1.0),
        }
    }

    /// `theta' z + mu`, with `mu` added last so the value matches the taped
    /// affine layer bit for bit.
    #[inline]
    pub fn project(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.theta.len());
        let mut acc = 0.0;
        for (t, z) in self.theta.iter().zip(row) {
            acc += t * z;
        }
        acc + self.mu
    }

    #[inline]
    pub fn respond(&self, row: &[f64]) -> f64 {
        sigmoid(self.project(row))
    }
}

/// Representation rows split by the sensitive attribute: `z0` holds group
/// `S = 0`, `z1` holds `S = 1`. Column counts must agree.
#[derive(Debug, Clone)]
pub struct GroupedBatch {
    pub z0: Matrix,
    pub z1: Matrix,
}

impl GroupedBatch {
    pub fn new(z0: Matrix, z1: Matrix) -> Result<Self, IpmError> {
        if z0.cols() != z1.cols() {
            return Err(IpmError::ShapeMismatch);
        }
        Ok(GroupedBatch { z0, z1 })
    }

    pub fn dim(&self) -> usize {
        self.z0.cols()
    }

    pub fn has_both_groups(&self) -> bool {
        self.z0.rows() > 0 && self.z1.rows() > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmError {
    /// One of the groups carries no rows; policy is the caller's.
    EmptyGroup,
    /// Grid oracle guard: brute force is restricted to low dimensions.
    DimensionTooLarge { dim: usize, max: usize },
    ShapeMismatch,
}

impl fmt::Display for IpmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IpmError::EmptyGroup => write!(f, "a sensitive group is empty"),
            IpmError::DimensionTooLarge { dim, max } => {
                write!(f, "grid oracle limited to dim <= {max}, got {dim}")
            }
            IpmError::ShapeMismatch => write!(f, "group matrices have different widths"),
        }
    }
}

/// Which group-fairness notion conditions the batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FairnessTarget {
    Dp,
    EOpp,
    Eo,
}

fn mean_response(disc: &Discriminator, z: &Matrix) -> f64 {
    let n = z.rows();
    let mut acc = 0.0;
    for i in 0..n {
        acc += disc.respond(z.row(i));
    }
    acc / n as f64
}

/// Signed difference of mean discriminator responses, group 0 minus group 1.
pub fn fair_gap_signed(disc: &Discriminator, batch: &GroupedBatch) -> Result<f64, IpmError> {
    if !batch.has_both_groups() {
        return Err(IpmError::EmptyGroup);
    }
    Ok(mean_response(disc, &batch.z0) - mean_response(disc, &batch.z1))
}

/// `|mean over z0 of sigmoid(theta' z + mu) - mean over z1 of the same|`,
/// always in `[0, 1)`.
pub fn fair_gap(disc: &Discriminator, batch: &GroupedBatch) -> Result<f64, IpmError> {
    fair_gap_signed(disc, batch).map(math::fabs)
}

/// Gradient of [`fair_gap`] in `(theta, mu)`. The absolute value takes
/// subgradient 0 at a zero gap. Each group accumulates separately so that
/// identical groups cancel to exactly zero.
pub fn fair_gap_grad(
    disc: &Discriminator,
    batch: &GroupedBatch,
) -> Result<(f64, Vec<f64>, f64), IpmError> {
    if !batch.has_both_groups() {
        return Err(IpmError::EmptyGroup);
    }
    let m = batch.dim();
    let mut sum = [0.0f64; 2];
    let mut d_mu = [0.0f64; 2];
    let mut d_theta = [vec![0.0f64; m], vec![0.0f64; m]];
    for (g, z) in [&batch.z0, &batch.z1].into_iter().enumerate() {
        for i in 0..z.rows() {
            let row = z.row(i);
            let s = disc.respond(row);
            sum[g] += s;
            let ds = s * (1.0 - s);
            d_mu[g] += ds;
            for (dt, zv) in d_theta[g].iter_mut().zip(row) {
                *dt += ds * zv;
            }
        }
    }
    let (n0, n1) = (batch.z0.rows() as f64, batch.z1.rows() as f64);
    let gap_signed = sum[0] / n0 - sum[1] / n1;
    let sign = if gap_signed > 0.0 {
        1.0
    } else if gap_signed < 0.0 {
        -1.0
    } else {
        0.0
    };
    let grad_theta: Vec<f64> = d_theta[0]
        .iter()
        .zip(&d_theta[1])
        .map(|(a, b)| sign * (a / n0 - b / n1))
        .collect();
    let grad_mu = sign * (d_mu[0] / n0 - d_mu[1] / n1);
    Ok((math::fabs(gap_signed), grad_theta, grad_mu))
}

/// `steps` plain gradient-ascent updates of `(theta, mu)` on [`fair_gap`].
pub fn ascend(
    disc: &Discriminator,
    batch: &GroupedBatch,
    lr_adv: f64,
    steps: usize,
) -> Result<Discriminator, IpmError> {
    let mut d = disc.clone();
    for _ in 0..steps {
        let (_, d_theta, d_mu) = fair_gap_grad(&d, batch)?;
        for (t, g) in d.theta.iter_mut().zip(&d_theta) {
            *t += lr_adv * g;
        }
        d.mu += lr_adv * d_mu;
    }
    Ok(d)
}

/// Best cut along one projection axis: sweep the pooled sorted projections
/// and return `(max |F0 - F1|, cut)` with the cut placed between data
/// points. O(n log n).
fn best_projection_cut(mut p0: Vec<f64>, mut p1: Vec<f64>) -> (f64, f64) {
    p0.sort_unstable_by(f64::total_cmp);
    p1.sort_unstable_by(f64::total_cmp);
    let (n0, n1) = (p0.len() as f64, p1.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut best = (0.0f64, 0.0f64);
    while i < p0.len() || j < p1.len() {
        let t = match (p0.get(i), p1.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        while i < p0.len() && p0[i] <= t {
            i += 1;
        }
        while j < p1.len() && p1[j] <= t {
            j += 1;
        }
        let gap = math::fabs(i as f64 / n0 - j as f64 / n1);
        if gap > best.0 {
            let next = match (p0.get(i), p1.get(j)) {
                (Some(&a), Some(&b)) => a.min(b),
                (Some(&a), None) => a,
                (None, Some(&b)) => b,
                (None, None) => t,
            };
            best = (gap, 0.5 * (t + next));
        }
    }
    best
}

/// Gradient ascent with multiplicative step-size adaptation: accepted steps
/// double the rate, rejected ones halve it and retry from the same point.
/// Returns the best gap seen anywhere on the trajectory.
fn adaptive_ascent(
    batch: &GroupedBatch,
    init: &Discriminator,
    lr0: f64,
    steps: usize,
) -> Result<f64, IpmError> {
    let mut d = init.clone();
    let mut lr = lr0;
    let (mut gap, mut g_theta, mut g_mu) = fair_gap_grad(&d, batch)?;
    let mut best = gap;
    for _ in 0..steps {
        let mut cand = d.clone();
        for (t, g) in cand.theta.iter_mut().zip(&g_theta) {
            *t += lr * g;
        }
        cand.mu += lr * g_mu;
        let (gap2, gt2, gm2) = fair_gap_grad(&cand, batch)?;
        if gap2 > gap {
            d = cand;
            gap = gap2;
            g_theta = gt2;
            g_mu = gm2;
            if gap > best {
                best = gap;
            }
            lr *= 2.0;
        } else {
            lr *= 0.5;
            if lr < 1e-12 {
                break;
            }
        }
    }
    Ok(best)
}

/// Number of random directions scanned when seeding an informed restart.
const DIRECTION_SCAN: usize = 32;
/// Projection scale given to an informed restart's initial discriminator.
const CUT_INIT_SCALE: f64 = 6.0;

/// Multi-restart ascent estimate of the sigmoid-IPM deviance; a lower bound
/// on the true supremum.
///
/// Restart `i` draws from the stream `(seed, i)`, so the estimate is
/// nondecreasing in `restarts`. Even restarts start from
/// `theta, mu ~ uniform(-1, 1)`; odd restarts scan `DIRECTION_SCAN` random
/// unit directions, keep the one whose projections admit the largest
/// single-cut CDF gap, and start from that cut (the supremum is approached
/// by sharp cuts along good directions, whose ascent basins are too narrow
/// for uniform starts to find reliably). Every restart is refined by `steps`
/// step-size-adaptive ascent updates at base rate `lr_adv`.
pub fn estimate_sipm(
    batch: &GroupedBatch,
    restarts: usize,
    lr_adv: f64,
    steps: usize,
    seed: u64,
) -> Result<f64, IpmError> {
    if !batch.has_both_groups() {
        return Err(IpmError::EmptyGroup);
    }
    let m = batch.dim();
    let mut best = 0.0f64;
    for i in 0..restarts {
        let mut rng = Rng::derive(seed, i as u64);
        let init = if i % 2 == 0 {
            Discriminator::random(m, &mut rng)
        } else {
            let mut top = (f64::NEG_INFINITY, alloc::vec![0.0; m], 0.0);
            for _ in 0..DIRECTION_SCAN {
                let mut u = rng.normal_vec(m);
                let norm_sq: f64 = u.iter().map(|v| v * v).sum();
                if norm_sq == 0.0 {
                    continue;
                }
                let inv = 1.0 / math::sqrt(norm_sq);
                for v in u.iter_mut() {
                    *v *= inv;
                }
                let project = |z: &Matrix| -> Vec<f64> {
                    (0..z.rows())
                        .map(|r| u.iter().zip(z.row(r)).map(|(a, b)| a * b).sum())
                        .collect()
                };
                let (ks, cut) = best_projection_cut(project(&batch.z0), project(&batch.z1));
                if ks > top.0 {
                    top = (ks, u.clone(), cut);
                }
            }
            Discriminator {
                theta: top.1.iter().map(|v| v * CUT_INIT_SCALE).collect(),
                mu: -CUT_INIT_SCALE * top.2,
            }
        };
        let gap = adaptive_ascent(batch, &init, lr_adv, steps)?;
        if gap > best {
            best = gap;
        }
    }
    Ok(best)
}

/// Default evaluation settings for [`estimate_sipm`]: 16 restarts of 200
/// adaptive ascent steps at base rate 2.0.
pub const EVAL_RESTARTS: usize = 16;
pub const EVAL_STEPS: usize = 200;
pub const EVAL_LR_ADV: f64 = 2.0;

/// [`estimate_sipm`] with the evaluation defaults.
pub fn estimate_sipm_default(batch: &GroupedBatch, seed: u64) -> Result<f64, IpmError> {
    estimate_sipm(batch, EVAL_RESTARTS, EVAL_LR_ADV, EVAL_STEPS, seed)
}

/// Inclusive axis grid `lo + k * (hi - lo) / (steps - 1)`; a single step
/// collapses to the midpoint.
#[derive(Debug, Clone, Copy)]
pub struct AxisGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl AxisGrid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        AxisGrid { lo, hi, steps }
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        if self.steps <= 1 {
            return 0.5 * (self.lo + self.hi);
        }
        self.lo + (self.hi - self.lo) * k as f64 / (self.steps - 1) as f64
    }

    fn is_symmetric(&self) -> bool {
        self.lo == -self.hi
    }
}

const GRID_MAX_DIM: usize = 3;

/// Brute-force maximum of [`fair_gap`] over the full Cartesian grid of
/// `(theta, mu)`. Independent ground truth for [`estimate_sipm`]; guarded to
/// `dim <= 3` because the grid explodes combinatorially.
///
/// Two exact shortcuts keep the scan affordable:
/// - `gap(-theta, -mu) = gap(theta, mu)` because `sigmoid(-x) = 1 - sigmoid(x)`
///   and the group weights sum to zero, so when every axis grid is symmetric
///   only canonical (first nonzero coordinate positive) `theta` points are
///   visited;
/// - `sigmoid(p + mu)` is evaluated as `1 / (1 + exp(-p) * exp(-mu))` with
///   `exp(-mu)` precomputed per grid level, removing the transcendental from
///   the inner loop.
pub fn grid_oracle_sipm(
    batch: &GroupedBatch,
    theta_grid: AxisGrid,
    mu_grid: AxisGrid,
) -> Result<f64, IpmError> {
    let m = batch.dim();
    if m > GRID_MAX_DIM {
        return Err(IpmError::DimensionTooLarge {
            dim: m,
            max: GRID_MAX_DIM,
        });
    }
    if !batch.has_both_groups() {
        return Err(IpmError::EmptyGroup);
    }
    grid_oracle_sipm_chunk(batch, theta_grid, mu_grid, 0, num_theta_points(m, theta_grid))
}

/// Number of theta grid points for a given dimension; chunk bounds for
/// [`grid_oracle_sipm_chunk`] range over `0..num_theta_points`.
pub fn num_theta_points(dim: usize, theta_grid: AxisGrid) -> usize {
    theta_grid.steps.pow(dim as u32)
}

/// The grid maximum restricted to a contiguous range of flattened theta
/// indices. The full oracle is the max over any partition into chunks, which
/// lets callers with threads fan the scan out and max-reduce.
pub fn grid_oracle_sipm_chunk(
    batch: &GroupedBatch,
    theta_grid: AxisGrid,
    mu_grid: AxisGrid,
    theta_begin: usize,
    theta_end: usize,
) -> Result<f64, IpmError> {
    let m = batch.dim();
    if m > GRID_MAX_DIM {
        return Err(IpmError::DimensionTooLarge {
            dim: m,
            max: GRID_MAX_DIM,
        });
    }
    if !batch.has_both_groups() {
        return Err(IpmError::EmptyGroup);
    }

    let symmetric = theta_grid.is_symmetric() && mu_grid.is_symmetric();
    let inv0 = 1.0 / batch.z0.rows() as f64;
    let inv1 = 1.0 / batch.z1.rows() as f64;

    // exp(-mu) per mu grid point.
    let mu_exp: Vec<f64> = (0..mu_grid.steps)
        .map(|k| math::exp(-mu_grid.point(k)))
        .collect();

    let mut theta = vec![0.0f64; m];
    // One accumulator per group so that identical groups cancel exactly.
    let mut acc0 = vec![0.0f64; mu_grid.steps];
    let mut acc1 = vec![0.0f64; mu_grid.steps];
    let mut best = 0.0f64;

    'theta: for flat in theta_begin..theta_end {
        let mut rem = flat;
        let mut leading_sign = 0i8;
        for slot in theta.iter_mut() {
            let k = rem % theta_grid.steps;
            rem /= theta_grid.steps;
            let v = theta_grid.point(k);
            *slot = v;
            if leading_sign == 0 && v != 0.0 {
                leading_sign = if v > 0.0 { 1 } else { -1 };
            }
        }
        if symmetric {
            // theta = 0 gives a constant discriminator (gap 0); negated
            // points are covered by their canonical partner.
            if leading_sign <= 0 {
                continue 'theta;
            }
        }

        acc0.iter_mut().for_each(|a| *a = 0.0);
        acc1.iter_mut().for_each(|a| *a = 0.0);
        for (z, acc) in [(&batch.z0, &mut acc0), (&batch.z1, &mut acc1)] {
            for i in 0..z.rows() {
                let row = z.row(i);
                let mut p = 0.0;
                for (t, zv) in theta.iter().zip(row) {
                    p += t * zv;
                }
                let e = math::exp(-p);
                for (a, &me) in acc.iter_mut().zip(&mu_exp) {
                    *a += 1.0 / (1.0 + e * me);
                }
            }
        }
        for (&a0, &a1) in acc0.iter().zip(&acc1) {
            let g = math::fabs(a0 * inv0 - a1 * inv1);
            if g > best {
                best = g;
            }
        }
    }
    Ok(best)
}

/// Row indices per stratum, split by the sensitive attribute: one
/// `(group0, group1)` pair for DP (all rows) and EOpp (rows with `y = 0`),
/// two pairs for EO (per label value).
pub fn strata_row_indices(
    n: usize,
    s: &[u8],
    y: &[u8],
    target: FairnessTarget,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let split = |keep: &dyn Fn(usize) -> bool| -> (Vec<usize>, Vec<usize>) {
        let mut rows0 = Vec::new();
        let mut rows1 = Vec::new();
        for (i, &si) in s.iter().enumerate().take(n) {
            if keep(i) {
                if si == 0 {
                    rows0.push(i);
                } else {
                    rows1.push(i);
                }
            }
        }
        (rows0, rows1)
    };
    match target {
        FairnessTarget::Dp => vec![split(&|_| true)],
        FairnessTarget::EOpp => vec![split(&|i| y[i] == 0)],
        FairnessTarget::Eo => vec![split(&|i| y[i] == 0), split(&|i| y[i] == 1)],
    }
}

/// Split representation rows into the grouped batches the fairness target
/// asks for: DP compares groups unconditionally, EOpp within `y = 0`, and EO
/// within each label stratum.
pub fn conditional_batches(
    z: &Matrix,
    s: &[u8],
    y: &[u8],
    target: FairnessTarget,
) -> Vec<GroupedBatch> {
    strata_row_indices(z.rows(), s, y, target)
        .into_iter()
        .map(|(rows0, rows1)| GroupedBatch {
            z0: z.select_rows(&rows0),
            z1: z.select_rows(&rows1),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN_3: f64 = 1.0986122886681098;

    fn one_dim(z0: &[f64], z1: &[f64]) -> GroupedBatch {
        GroupedBatch {
            z0: Matrix::from_vec(z0.len(), 1, z0.to_vec()).unwrap(),
            z1: Matrix::from_vec(z1.len(), 1, z1.to_vec()).unwrap(),
        }
    }

    #[test]
    fn gap_closed_form() {
        let batch = one_dim(&[0.0], &[LN_3]);
        let disc = Discriminator {
            theta: vec![1.0],
            mu: 0.0,
        };
        let gap = fair_gap(&disc, &batch).unwrap();
        assert!((gap - 0.25).abs() < 1e-15);
    }

    #[test]
    fn identical_groups_and_constant_discriminator_give_zero() {
        let batch = one_dim(&[0.3, -1.2, 4.0], &[0.3, -1.2, 4.0]);
        for mu in [-2.0, 0.0, 1.5] {
            let disc = Discriminator {
                theta: vec![0.7],
                mu,
            };
            assert_eq!(fair_gap(&disc, &batch).unwrap(), 0.0);
        }
        let batch2 = one_dim(&[5.0, -2.0], &[0.1]);
        let constant = Discriminator {
            theta: vec![0.0],
            mu: 0.4,
        };
        assert_eq!(fair_gap(&constant, &batch2).unwrap(), 0.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        let batch = GroupedBatch {
            z0: Matrix::zeros(0, 1),
            z1: Matrix::zeros(2, 1),
        };
        let disc = Discriminator::zeros(1);
        assert_eq!(fair_gap(&disc, &batch), Err(IpmError::EmptyGroup));
        assert_eq!(
            ascend(&disc, &batch, 0.1, 3).unwrap_err(),
            IpmError::EmptyGroup
        );
        assert_eq!(
            estimate_sipm(&batch, 2, 0.1, 3, 0).unwrap_err(),
            IpmError::EmptyGroup
        );
    }

    #[test]
    fn ascend_stationary_and_identity_cases() {
        // theta = 0 on symmetric data: zero gradient, discriminator fixed.
        let batch = one_dim(&[-1.0, 1.0], &[-1.0, 1.0]);
        let disc = Discriminator::zeros(1);
        let out = ascend(&disc, &batch, 0.5, 10).unwrap();
        assert_eq!(out, disc);
        // zero steps is the identity
        let batch2 = one_dim(&[-2.0], &[2.0]);
        let d2 = Discriminator {
            theta: vec![0.3],
            mu: -0.1,
        };
        assert_eq!(ascend(&d2, &batch2, 0.5, 0).unwrap(), d2);
    }

    #[test]
    fn ascent_increases_gap_on_separated_data() {
        let batch = one_dim(&[-2.0], &[2.0]);
        let mut disc = Discriminator {
            theta: vec![-0.2], // start pointing the wrong way
            mu: 0.1,
        };
        let mut prev = fair_gap(&disc, &batch).unwrap();
        for _ in 0..50 {
            disc = ascend(&disc, &batch, 0.05, 1).unwrap();
            let g = fair_gap(&disc, &batch).unwrap();
            assert!(g > prev, "gap must strictly increase: {g} vs {prev}");
            prev = g;
        }
    }

    #[test]
    fn estimate_reaches_saturation_on_separated_data() {
        let batch = one_dim(&[-2.0], &[2.0]);
        let est = estimate_sipm_default(&batch, 7).unwrap();
        assert!(est > 0.99, "estimate {est}");
    }

    #[test]
    fn estimate_zero_on_identical_groups() {
        let batch = one_dim(&[0.5, -0.5, 2.0], &[0.5, -0.5, 2.0]);
        assert_eq!(estimate_sipm(&batch, 4, 1.0, 50, 3).unwrap(), 0.0);
        let grid = AxisGrid::new(-20.0, 20.0, 81);
        assert_eq!(grid_oracle_sipm(&batch, grid, grid).unwrap(), 0.0);
    }

    #[test]
    fn estimate_monotone_in_restarts() {
        let mut rng = Rng::new(11);
        let z0: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let z1: Vec<f64> = (0..12).map(|_| rng.normal() + 0.8).collect();
        let batch = one_dim(&z0, &z1);
        let mut prev = 0.0;
        for restarts in [1, 2, 4, 8, 16] {
            let est = estimate_sipm(&batch, restarts, 1.0, 60, 5).unwrap();
            assert!(est >= prev);
            prev = est;
        }
    }

    #[test]
    fn grid_oracle_extreme_point_value() {
        // z0 = {1}, z1 = {-1}: at theta = 20, mu = 0 the gap is
        // sigmoid(20) - sigmoid(-20) = 1 - 2 sigmoid(-20).
        let batch = one_dim(&[1.0], &[-1.0]);
        let grid = AxisGrid::new(-20.0, 20.0, 401);
        let got = grid_oracle_sipm(&batch, grid, grid).unwrap();
        let floor = sigmoid(20.0) - sigmoid(-20.0);
        assert!(got >= floor, "{got} < {floor}");
        assert!(got < 1.0);
    }

    #[test]
    fn grid_refinement_never_decreases() {
        let batch = one_dim(&[0.2, 1.4], &[-0.9, 0.3, 2.0]);
        let coarse = AxisGrid::new(-20.0, 20.0, 101);
        let fine = AxisGrid::new(-20.0, 20.0, 201); // superset of coarse points
        let a = grid_oracle_sipm(&batch, coarse, coarse).unwrap();
        let b = grid_oracle_sipm(&batch, fine, fine).unwrap();
        assert!(b >= a);
    }

    #[test]
    fn chunked_oracle_matches_whole_scan() {
        let batch = GroupedBatch {
            z0: Matrix::from_vec(3, 2, vec![0.1, -0.4, 1.0, 0.2, -0.7, 0.9]).unwrap(),
            z1: Matrix::from_vec(2, 2, vec![0.6, 0.6, -1.1, 0.05]).unwrap(),
        };
        let tg = AxisGrid::new(-8.0, 8.0, 33);
        let mg = AxisGrid::new(-8.0, 8.0, 33);
        let whole = grid_oracle_sipm(&batch, tg, mg).unwrap();
        let total = num_theta_points(2, tg);
        let half = total / 2;
        let a = grid_oracle_sipm_chunk(&batch, tg, mg, 0, half).unwrap();
        let b = grid_oracle_sipm_chunk(&batch, tg, mg, half, total).unwrap();
        assert_eq!(whole, a.max(b));
    }

    #[test]
    fn symmetric_shortcut_agrees_with_asymmetric_scan() {
        // An asymmetric grid covering the same points forces the full scan;
        // results must agree with the symmetric fast path.
        let batch = one_dim(&[0.3, -1.0, 0.8], &[0.5, 0.9]);
        let sym = AxisGrid::new(-6.0, 6.0, 25);
        let res_sym = grid_oracle_sipm(&batch, sym, sym).unwrap();
        // Same point set, declared asymmetrically by nudging lo by 0 ulps is
        // not possible; instead scan full range via chunk API which also
        // honors the shortcut, then compare against a manual double loop.
        let mut best = 0.0f64;
        for i in 0..25 {
            for j in 0..25 {
                let disc = Discriminator {
                    theta: vec![sym.point(i)],
                    mu: sym.point(j),
                };
                let g = fair_gap(&disc, &batch).unwrap();
                if g > best {
                    best = g;
                }
            }
        }
        assert!((res_sym - best).abs() < 1e-12, "{res_sym} vs {best}");
    }

    #[test]
    fn oracle_dimension_guard() {
        let batch = GroupedBatch {
            z0: Matrix::zeros(2, 4),
            z1: Matrix::zeros(2, 4),
        };
        let g = AxisGrid::new(-1.0, 1.0, 3);
        assert!(matches!(
            grid_oracle_sipm(&batch, g, g),
            Err(IpmError::DimensionTooLarge { dim: 4, max: 3 })
        ));
    }

    #[test]
    fn conditional_batches_shapes() {
        let z = Matrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = [0, 0, 1, 1];
        let y = [0, 1, 0, 1];
        let dp = conditional_batches(&z, &s, &y, FairnessTarget::Dp);
        assert_eq!(dp.len(), 1);
        assert_eq!(dp[0].z0.data(), &[1.0, 2.0]);
        assert_eq!(dp[0].z1.data(), &[3.0, 4.0]);
        let eopp = conditional_batches(&z, &s, &y, FairnessTarget::EOpp);
        assert_eq!(eopp.len(), 1);
        assert_eq!(eopp[0].z0.data(), &[1.0]);
        assert_eq!(eopp[0].z1.data(), &[3.0]);
        let eo = conditional_batches(&z, &s, &y, FairnessTarget::Eo);
        assert_eq!(eo.len(), 2);
        assert_eq!(eo[1].z0.data(), &[2.0]);
        assert_eq!(eo[1].z1.data(), &[4.0]);
    }
}
