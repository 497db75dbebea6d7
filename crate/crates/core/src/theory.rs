//! Executable checks of the moment-witness constructions behind the
//! fairness-control analysis, plus the empirical surrogates used to compare
//! the sigmoid-IPM against projected CDF distances.
//!
//! A [`MomentWitness`] expresses the monomial `x^r1 y^r2` as a combination
//! `sum_i beta_i (x + lambda_i y)^r` over the fixed nodes
//! `lambda_i = -1 + 2i/r`, with the closed-form coefficients
//!
//! ```text
//! beta_i = (-1)^r1 * e_{r1}(lambda without i)
//!          / ( C(r, r2) * prod_{j != i} (lambda_i - lambda_j) )
//! ```
//!
//! where `e_k` is the elementary symmetric polynomial. The coefficient-size
//! bound `sum |beta_i| < e^r` is checked, not assumed. [`MultiWitness`]
//! composes these pairwise to express any monomial in `u` variables as a
//! combination of powers of one-dimensional projections with directions in
//! `[-1, 1]^u` and `sum |beta| <= e^((u-1) r)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ipm::{estimate_sipm_default, grid_oracle_sipm, AxisGrid, GroupedBatch, IpmError};
use crate::math;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Degree guard for the univariate witness; the Vandermonde system's
/// conditioning degrades quickly past this.
pub const MAX_UNIVARIATE_DEGREE: u32 = 12;
/// Guards for the multivariate composition.
pub const MAX_MULTI_DEGREE: u32 = 8;
pub const MAX_MULTI_VARS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TheoryError {
    DegreeTooLarge { got: u32, max: u32 },
    TooManyVariables { got: usize, max: usize },
    BadExponent(String),
    Ipm(IpmError),
}

impl fmt::Display for TheoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheoryError::DegreeTooLarge { got, max } => {
                write!(f, "total degree {got} exceeds guard {max}")
            }
            TheoryError::TooManyVariables { got, max } => {
                write!(f, "{got} variables exceed guard {max}")
            }
            TheoryError::BadExponent(s) => write!(f, "bad exponent vector: {s}"),
            TheoryError::Ipm(e) => write!(f, "{e}"),
        }
    }
}

impl From<IpmError> for TheoryError {
    fn from(e: IpmError) -> Self {
        TheoryError::Ipm(e)
    }
}

/// Kahan-compensated sum; witness evaluation cancels heavily, so the naive
/// sum would waste most of the residual budget on rounding.
fn kahan_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for t in terms {
        let y = t - c;
        let s = sum + y;
        c = (s - sum) - y;
        sum = s;
    }
    sum
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Elementary symmetric polynomial `e_k` of the given values.
fn elementary_symmetric(values: &[f64], k: usize) -> f64 {
    let mut e = vec![0.0f64; k + 1];
    e[0] = 1.0;
    for &v in values {
        for j in (1..=k).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[k]
}

/// Coefficients expressing `x^r1 y^r2` through powers of `x + lambda_i y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentWitness {
    pub r1: u32,
    pub r2: u32,
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
}

/// Build the witness for `x^r1 y^r2` from the closed form.
pub fn vandermonde_witness(r1: u32, r2: u32) -> Result<MomentWitness, TheoryError> {
    if r1 == 0 || r2 == 0 {
        return Err(TheoryError::BadExponent(String::from(
            "exponents must be >= 1",
        )));
    }
    let r = r1 + r2;
    if r > MAX_UNIVARIATE_DEGREE {
        return Err(TheoryError::DegreeTooLarge {
            got: r,
            max: MAX_UNIVARIATE_DEGREE,
        });
    }
    let lambdas: Vec<f64> = (0..=r).map(|i| -1.0 + 2.0 * i as f64 / r as f64).collect();
    let sign = if r1.is_multiple_of(2) { 1.0 } else { -1.0 };
    let choose = binomial(r, r2);
    let mut betas = Vec::with_capacity(lambdas.len());
    for i in 0..lambdas.len() {
        let others: Vec<f64> = lambdas
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &l)| l)
            .collect();
        let numer = sign * elementary_symmetric(&others, r1 as usize);
        let mut denom = choose;
        for &l in &others {
            denom *= lambdas[i] - l;
        }
        betas.push(numer / denom);
    }
    Ok(MomentWitness {
        r1,
        r2,
        lambdas,
        betas,
    })
}

impl MomentWitness {
    pub fn degree(&self) -> u32 {
        self.r1 + self.r2
    }

    /// `sum_i beta_i (x + lambda_i y)^r`.
    pub fn eval_combination(&self, x: f64, y: f64) -> f64 {
        let r = self.degree();
        kahan_sum(
            self.betas
                .iter()
                .zip(&self.lambdas)
                .map(|(&b, &l)| b * math::powi(x + l * y, r)),
        )
    }

    /// `x^r1 y^r2`.
    pub fn target(&self, x: f64, y: f64) -> f64 {
        math::powi(x, self.r1) * math::powi(y, self.r2)
    }

    /// `|combination - target| / max(1, |target|)`.
    pub fn residual(&self, x: f64, y: f64) -> f64 {
        let t = self.target(x, y);
        math::fabs(self.eval_combination(x, y) - t) / math::fabs(t).max(1.0)
    }

    /// Worst residual over `points` random draws from `[-1, 1]^2`.
    pub fn max_residual(&self, points: usize, rng: &mut Rng) -> f64 {
        let mut worst = 0.0f64;
        for _ in 0..points {
            let x = rng.uniform(-1.0, 1.0);
            let y = rng.uniform(-1.0, 1.0);
            worst = worst.max(self.residual(x, y));
        }
        worst
    }

    pub fn sum_abs_beta(&self) -> f64 {
        self.betas.iter().map(|b| math::fabs(*b)).sum()
    }
}

/// One term of a multivariate witness: a coefficient and a direction in
/// `[-1, 1]^u`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessTerm {
    pub beta: f64,
    pub direction: Vec<f64>,
}

/// Expresses `prod_j z_j^{r_j}` as `sum_i beta_i (direction_i' z)^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiWitness {
    pub exponents: Vec<u32>,
    pub terms: Vec<WitnessTerm>,
}

/// Build the multivariate witness by pairwise composition: given a witness
/// for the first `u - 1` variables, each of its projection powers is
/// re-expanded against the next variable with a fresh univariate witness.
pub fn multivariate_witness(exponents: &[u32]) -> Result<MultiWitness, TheoryError> {
    let u = exponents.len();
    if u == 0 || exponents.contains(&0) {
        return Err(TheoryError::BadExponent(String::from(
            "need at least one variable, all exponents >= 1",
        )));
    }
    if u > MAX_MULTI_VARS {
        return Err(TheoryError::TooManyVariables {
            got: u,
            max: MAX_MULTI_VARS,
        });
    }
    let total: u32 = exponents.iter().sum();
    if total > MAX_MULTI_DEGREE {
        return Err(TheoryError::DegreeTooLarge {
            got: total,
            max: MAX_MULTI_DEGREE,
        });
    }

    let mut terms = vec![WitnessTerm {
        beta: 1.0,
        direction: vec![1.0],
    }];
    let mut degree_so_far = exponents[0];
    for &r_next in &exponents[1..] {
        let pair = vandermonde_witness(degree_so_far, r_next)?;
        let mut next = Vec::with_capacity(terms.len() * pair.betas.len());
        for term in &terms {
            for (&b2, &l2) in pair.betas.iter().zip(&pair.lambdas) {
                let mut direction = term.direction.clone();
                direction.push(l2);
                next.push(WitnessTerm {
                    beta: term.beta * b2,
                    direction,
                });
            }
        }
        terms = next;
        degree_so_far += r_next;
    }
    Ok(MultiWitness {
        exponents: exponents.to_vec(),
        terms,
    })
}

impl MultiWitness {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn vars(&self) -> usize {
        self.exponents.len()
    }

    /// `sum_i beta_i (direction_i' z)^r`.
    pub fn eval_combination(&self, z: &[f64]) -> f64 {
        let r = self.degree();
        kahan_sum(self.terms.iter().map(|t| {
            let p: f64 = t
                .direction
                .iter()
                .zip(z)
                .map(|(&d, &zv)| d * zv)
                .sum();
            t.beta * math::powi(p, r)
        }))
    }

    /// `prod_j z_j^{r_j}`.
    pub fn target(&self, z: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(z)
            .map(|(&r, &zv)| math::powi(zv, r))
            .product()
    }

    pub fn residual(&self, z: &[f64]) -> f64 {
        let t = self.target(z);
        math::fabs(self.eval_combination(z) - t) / math::fabs(t).max(1.0)
    }

    pub fn max_residual(&self, points: usize, rng: &mut Rng) -> f64 {
        let u = self.vars();
        let mut worst = 0.0f64;
        let mut z = vec![0.0; u];
        for _ in 0..points {
            for zv in z.iter_mut() {
                *zv = rng.uniform(-1.0, 1.0);
            }
            worst = worst.max(self.residual(&z));
        }
        worst
    }

    pub fn sum_abs_beta(&self) -> f64 {
        self.terms.iter().map(|t| math::fabs(t.beta)).sum()
    }
}

/// Empirical surrogate for the projected-CDF distance: the worst gap between
/// the groups' empirical CDFs of `a' z`, maximized over `n_directions`
/// random unit directions and `n_thresholds` random cut points each.
/// Direction `i` draws from the stream `(seed, i)`, so enlarging
/// `n_directions` only extends the scan.
pub fn projected_cdf_gap(
    batch: &GroupedBatch,
    n_directions: usize,
    n_thresholds: usize,
    seed: u64,
) -> Result<f64, TheoryError> {
    if !batch.has_both_groups() {
        return Err(TheoryError::Ipm(IpmError::EmptyGroup));
    }
    let m = batch.dim();
    let n0 = batch.z0.rows();
    let n1 = batch.z1.rows();
    let mut worst = 0.0f64;
    let mut dir = vec![0.0; m];
    let mut proj0 = vec![0.0; n0];
    let mut proj1 = vec![0.0; n1];
    for i in 0..n_directions {
        let mut rng = Rng::derive(seed, i as u64);
        let mut norm_sq = 0.0;
        for d in dir.iter_mut() {
            *d = rng.normal();
            norm_sq += *d * *d;
        }
        if norm_sq == 0.0 {
            continue;
        }
        let inv = 1.0 / math::sqrt(norm_sq);
        for d in dir.iter_mut() {
            *d *= inv;
        }
        let project = |z: &Matrix, out: &mut [f64]| {
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (dv, zv) in dir.iter().zip(z.row(r)) {
                    acc += dv * zv;
                }
                *o = acc;
            }
        };
        project(&batch.z0, &mut proj0);
        project(&batch.z1, &mut proj1);
        let lo = proj0
            .iter()
            .chain(proj1.iter())
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = proj0
            .iter()
            .chain(proj1.iter())
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        for _ in 0..n_thresholds {
            let t = rng.uniform(lo, hi);
            let f0 = proj0.iter().filter(|&&p| p <= t).count() as f64 / n0 as f64;
            let f1 = proj1.iter().filter(|&&p| p <= t).count() as f64 / n1 as f64;
            worst = worst.max(math::fabs(f0 - f1));
        }
    }
    Ok(worst)
}

/// `|mean over group 0 of prod z_j^{r_j} - mean over group 1|`.
pub fn moment_gap(batch: &GroupedBatch, exponents: &[u32]) -> Result<f64, TheoryError> {
    if !batch.has_both_groups() {
        return Err(TheoryError::Ipm(IpmError::EmptyGroup));
    }
    if exponents.len() != batch.dim() {
        return Err(TheoryError::BadExponent(alloc::format!(
            "{} exponents for dimension {}",
            exponents.len(),
            batch.dim()
        )));
    }
    let total: u32 = exponents.iter().sum();
    if total > MAX_MULTI_DEGREE {
        return Err(TheoryError::DegreeTooLarge {
            got: total,
            max: MAX_MULTI_DEGREE,
        });
    }
    let group_mean = |z: &Matrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..z.rows() {
            let mut prod = 1.0;
            for (&r, &zv) in exponents.iter().zip(z.row(i)) {
                prod *= math::powi(zv, r);
            }
            acc += prod;
        }
        acc / z.rows() as f64
    };
    Ok(math::fabs(group_mean(&batch.z0) - group_mean(&batch.z1)))
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut out = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / math::sqrt(va * vb)
}

/// One entry of the verification report.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckOutcome {
    pub check_id: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check_below(id: &str, measured: f64, threshold: f64) -> CheckOutcome {
    CheckOutcome {
        check_id: String::from(id),
        pass: measured < threshold,
        measured,
        threshold,
    }
}

fn check_at_least(id: &str, measured: f64, threshold: f64) -> CheckOutcome {
    CheckOutcome {
        check_id: String::from(id),
        pass: measured >= threshold,
        measured,
        threshold,
    }
}

fn shifted_batch(m: usize, n_per_group: usize, delta: f64, rng: &mut Rng) -> GroupedBatch {
    let z0 = Matrix::from_vec(n_per_group, m, rng.normal_vec(n_per_group * m)).unwrap();
    let z1 = Matrix::from_vec(
        n_per_group,
        m,
        (0..n_per_group * m).map(|_| rng.normal() + delta).collect(),
    )
    .unwrap();
    GroupedBatch { z0, z1 }
}

/// Run the full verification battery. `inject_failure` flips one witness
/// coefficient first, as a self-test hook that must turn the identity check
/// red.
pub fn verify_suite_with(seed: u64, inject_failure: bool) -> VerifyReport {
    let mut report = VerifyReport::default();
    let mut rng = Rng::derive(seed, 77);

    // univariate witness identities and coefficient bound
    let mut worst_resid = 0.0f64;
    let mut worst_bound = 0.0f64;
    for r in 2..=MAX_UNIVARIATE_DEGREE {
        for r1 in 1..r {
            let r2 = r - r1;
            let mut w = vandermonde_witness(r1, r2).expect("within guard");
            if inject_failure && r1 == 1 && r2 == 1 {
                w.betas[0] = -w.betas[0];
            }
            worst_resid = worst_resid.max(w.max_residual(100, &mut rng));
            worst_bound = worst_bound.max(w.sum_abs_beta() / math::exp(r as f64));
        }
    }
    report
        .checks
        .push(check_below("vandermonde_identity", worst_resid, 1e-8));
    report
        .checks
        .push(check_below("vandermonde_bound", worst_bound, 1.0));

    // the (1,1) base case in closed form
    let base = vandermonde_witness(1, 1).unwrap();
    let base_err = math::fabs(base.betas[0] + 0.25)
        .max(math::fabs(base.betas[1]))
        .max(math::fabs(base.betas[2] - 0.25));
    report
        .checks
        .push(check_below("vandermonde_base_case", base_err, 1e-14));

    // multivariate composition: all-ones exponents up to the guards plus a
    // few mixed vectors
    let exponent_sets: &[&[u32]] = &[
        &[1],
        &[1, 1],
        &[1, 1, 1],
        &[1, 1, 1, 1],
        &[2, 1],
        &[1, 2, 1],
        &[2, 2],
        &[3, 1],
        &[2, 2, 2],
        &[1, 1, 2],
    ];
    let mut worst_multi = 0.0f64;
    let mut worst_multi_bound = 0.0f64;
    for exps in exponent_sets {
        let w = multivariate_witness(exps).expect("within guard");
        worst_multi = worst_multi.max(w.max_residual(100, &mut rng));
        let cap = math::exp(((w.vars() - 1) as u32 * w.degree()) as f64);
        worst_multi_bound = worst_multi_bound.max(w.sum_abs_beta() / cap);
    }
    report
        .checks
        .push(check_below("multivariate_identity", worst_multi, 1e-6));
    report.checks.push(CheckOutcome {
        check_id: String::from("multivariate_bound"),
        pass: worst_multi_bound <= 1.0,
        measured: worst_multi_bound,
        threshold: 1.0,
    });

    // identical groups make every deviance exactly zero (and disjoint
    // supports make them all large)
    let coarse = AxisGrid::new(-20.0, 20.0, 81);
    let mut ident_worst = 0.0f64;
    let mut disjoint_best = f64::INFINITY;
    for k in 0..10 {
        let m = 1 + (k % 2);
        let n = 8 + k;
        let z = Matrix::from_vec(n, m, rng.normal_vec(n * m)).unwrap();
        let same = GroupedBatch {
            z0: z.clone(),
            z1: z,
        };
        let est = estimate_sipm_default(&same, seed ^ k as u64).unwrap();
        let orc = grid_oracle_sipm(&same, coarse, coarse).unwrap();
        ident_worst = ident_worst.max(est.max(orc));

        let gap = 1.5;
        let z0 = Matrix::from_vec(
            n,
            m,
            (0..n * m).map(|_| -gap - rng.next_f64()).collect(),
        )
        .unwrap();
        let z1 = Matrix::from_vec(n, m, (0..n * m).map(|_| gap + rng.next_f64()).collect())
            .unwrap();
        let apart = GroupedBatch { z0, z1 };
        let est = estimate_sipm_default(&apart, seed ^ (k as u64) << 1).unwrap();
        let orc = grid_oracle_sipm(&apart, coarse, coarse).unwrap();
        disjoint_best = disjoint_best.min(est.min(orc));
    }
    report.checks.push(CheckOutcome {
        check_id: String::from("identical_groups_zero"),
        pass: ident_worst == 0.0,
        measured: ident_worst,
        threshold: 0.0,
    });
    report.checks.push(check_at_least(
        "disjoint_groups_positive",
        disjoint_best,
        0.5,
    ));

    // ascent estimator against the brute-force oracle on small instances
    let mut floor_ratio = f64::INFINITY;
    for k in 0..6 {
        let m = 1 + (k % 2);
        let batch = shifted_batch(m, 12, 0.4 + 0.4 * k as f64, &mut rng);
        let est = estimate_sipm_default(&batch, seed.wrapping_add(k as u64)).unwrap();
        let orc = grid_oracle_sipm(&batch, coarse, coarse).unwrap();
        if orc > 0.0 {
            floor_ratio = floor_ratio.min(est / orc);
        }
    }
    report
        .checks
        .push(check_at_least("ascent_vs_oracle", floor_ratio, 0.95));

    // both deviances strictly increase with the group shift
    let n_mc = 10_000;
    let deltas = [0.0, 0.5, 1.0, 2.0];
    let mut sipm_vals = Vec::new();
    let mut cdf_vals = Vec::new();
    for (i, &d) in deltas.iter().enumerate() {
        let batch = shifted_batch(2, n_mc, d, &mut rng);
        sipm_vals.push(estimate_sipm_default(&batch, seed.wrapping_add(100 + i as u64)).unwrap());
        cdf_vals.push(projected_cdf_gap(&batch, 24, 48, seed.wrapping_add(200 + i as u64)).unwrap());
    }
    let min_step = sipm_vals
        .windows(2)
        .chain(cdf_vals.windows(2))
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    report.checks.push(CheckOutcome {
        check_id: String::from("shift_monotone"),
        pass: min_step > 0.0,
        measured: min_step,
        threshold: 0.0,
    });

    // rank agreement between the two deviances across a finer shift sweep
    let sweep = [0.0, 0.15, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];
    let mut sipm_sweep = Vec::new();
    let mut cdf_sweep = Vec::new();
    for (i, &d) in sweep.iter().enumerate() {
        let batch = shifted_batch(2, 2_000, d, &mut rng);
        sipm_sweep.push(estimate_sipm_default(&batch, seed.wrapping_add(300 + i as u64)).unwrap());
        cdf_sweep.push(projected_cdf_gap(&batch, 16, 32, seed.wrapping_add(400 + i as u64)).unwrap());
    }
    let rho = spearman(&sipm_sweep, &cdf_sweep);
    report
        .checks
        .push(check_at_least("deviance_rank_correlation", rho, 0.9));

    // first moments: the moment gap at |r| = 1 is exactly the mean gap of
    // that coordinate as the metrics module computes it
    let batch = shifted_batch(3, 50, 0.7, &mut rng);
    let mg = moment_gap(&batch, &[1, 0, 0]).unwrap();
    let mut col0 = Vec::new();
    let mut groups = Vec::new();
    for (g, z) in [&batch.z0, &batch.z1].into_iter().enumerate() {
        for i in 0..z.rows() {
            col0.push(z.at(i, 0));
            groups.push(g as u8);
        }
    }
    let scored = crate::metrics::ScoredBatch::new(col0, groups, None).unwrap();
    let mdp = crate::metrics::delta_mdp(&scored, crate::metrics::Squash::Identity).unwrap();
    report.checks.push(check_below(
        "moment_gap_is_mean_gap",
        math::fabs(mg - mdp),
        1e-12,
    ));

    report
}

/// [`verify_suite_with`] without the failure hook.
pub fn verify_suite(seed: u64) -> VerifyReport {
    verify_suite_with(seed, false)
}
