//! Dataset container, splitting, standardization, and a synthetic generator
//! with Monte-Carlo ground truth for trend checks.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::func::sigmoid;
use crate::math;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Which partition a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// Per-feature statistics fitted on the training split, plus the indices of
/// constant features that were dropped while fitting.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub dropped_constant: Vec<usize>,
}

/// Feature matrix, binary sensitive attribute, binary label, and split tags.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub x: Matrix,
    pub s: Vec<u8>,
    pub y: Vec<u8>,
    pub split: Vec<SplitTag>,
    pub standardization: Option<Standardization>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataError {
    LengthMismatch(String),
    EmptySplit(SplitTag),
    NotBinary(String),
    TooSmall { need: usize, got: usize },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::LengthMismatch(s) => write!(f, "length mismatch: {}", s),
            DataError::EmptySplit(tag) => write!(f, "split {:?} is empty", tag),
            DataError::NotBinary(col) => write!(f, "{} must be 0/1", col),
            DataError::TooSmall { need, got } => {
                write!(f, "need at least {need} rows, got {got}")
            }
        }
    }
}

impl Dataset {
    pub fn new(x: Matrix, s: Vec<u8>, y: Vec<u8>) -> Result<Self, DataError> {
        let n = x.rows();
        if s.len() != n || y.len() != n {
            return Err(DataError::LengthMismatch(alloc::format!(
                "{} rows vs {} s vs {} y",
                n,
                s.len(),
                y.len()
            )));
        }
        if s.iter().any(|&v| v > 1) {
            return Err(DataError::NotBinary(String::from("sensitive attribute")));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(DataError::NotBinary(String::from("label")));
        }
        Ok(Dataset {
            x,
            s,
            y,
            split: vec![SplitTag::Train; n],
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn indices_of(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == tag).collect()
    }

    /// Materialize one split as `(X, s, y)`.
    pub fn part(&self, tag: SplitTag) -> (Matrix, Vec<u8>, Vec<u8>) {
        let idx = self.indices_of(tag);
        let x = self.x.select_rows(&idx);
        let s = idx.iter().map(|&i| self.s[i]).collect();
        let y = idx.iter().map(|&i| self.y[i]).collect();
        (x, s, y)
    }
}

/// How rows are assigned to train/val/test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SplitScheme {
    /// Rows at index >= `test_start` form a fixed test partition; the rest
    /// is split with `val_frac` of it (floored) going to validation.
    FixedTest { test_start: usize, val_frac: f64 },
    /// Fully random three-way split by fractions (train, val); the
    /// remainder is test.
    Random { train_frac: f64, val_frac: f64 },
}

/// Assign split tags deterministically from the seed. The validation count
/// is `floor(val_frac * n_pool)` over the shuffled non-test pool.
pub fn split(dataset: &mut Dataset, scheme: SplitScheme, seed: u64) -> Result<(), DataError> {
    let n = dataset.len();
    let mut rng = Rng::derive(seed, 0x517);
    match scheme {
        SplitScheme::FixedTest {
            test_start,
            val_frac,
        } => {
            if test_start == 0 || test_start > n {
                return Err(DataError::TooSmall {
                    need: test_start,
                    got: n,
                });
            }
            let mut pool: Vec<usize> = (0..test_start).collect();
            rng.shuffle(&mut pool);
            let n_val = (val_frac * pool.len() as f64) as usize;
            for (k, &i) in pool.iter().enumerate() {
                dataset.split[i] = if k < n_val {
                    SplitTag::Val
                } else {
                    SplitTag::Train
                };
            }
            for i in test_start..n {
                dataset.split[i] = SplitTag::Test;
            }
        }
        SplitScheme::Random {
            train_frac,
            val_frac,
        } => {
            let mut pool: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut pool);
            let n_train = (train_frac * n as f64) as usize;
            let n_val = (val_frac * n as f64) as usize;
            for (k, &i) in pool.iter().enumerate() {
                dataset.split[i] = if k < n_train {
                    SplitTag::Train
                } else if k < n_train + n_val {
                    SplitTag::Val
                } else {
                    SplitTag::Test
                };
            }
        }
    }
    for tag in [SplitTag::Train, SplitTag::Val, SplitTag::Test] {
        if dataset.indices_of(tag).is_empty() {
            return Err(DataError::EmptySplit(tag));
        }
    }
    Ok(())
}

/// Standardize every feature with the training split's mean and standard
/// deviation; features constant on the training split are dropped and their
/// original indices recorded.
pub fn standardize(dataset: &Dataset) -> Result<Dataset, DataError> {
    let train_idx = dataset.indices_of(SplitTag::Train);
    if train_idx.is_empty() {
        return Err(DataError::EmptySplit(SplitTag::Train));
    }
    let d = dataset.dim();
    let n_train = train_idx.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in &train_idx {
        for (m, v) in mean.iter_mut().zip(dataset.x.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n_train;
    }
    let mut var = vec![0.0; d];
    for &i in &train_idx {
        for j in 0..d {
            let dv = dataset.x.at(i, j) - mean[j];
            var[j] += dv * dv;
        }
    }
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    let mut std = Vec::new();
    let mut kept_mean = Vec::new();
    for j in 0..d {
        let sd = math::sqrt(var[j] / n_train);
        if sd > 0.0 {
            keep.push(j);
            std.push(sd);
            kept_mean.push(mean[j]);
        } else {
            dropped.push(j);
        }
    }
    let n = dataset.len();
    let mut data = Vec::with_capacity(n * keep.len());
    for i in 0..n {
        let row = dataset.x.row(i);
        for (k, &j) in keep.iter().enumerate() {
            data.push((row[j] - kept_mean[k]) / std[k]);
        }
    }
    Ok(Dataset {
        x: Matrix::from_vec(n, keep.len(), data).unwrap(),
        s: dataset.s.clone(),
        y: dataset.y.clone(),
        split: dataset.split.clone(),
        standardization: Some(Standardization {
            mean: kept_mean,
            std,
            dropped_constant: dropped,
        }),
    })
}

/// Synthetic data specification: `s ~ Bernoulli(1/2)`,
/// `x | s ~ Normal(delta * s * 1, I_d)`,
/// `y ~ Bernoulli(sigmoid(w'x + bias_s * s))`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    /// Group mean shift applied to every coordinate for `s = 1`.
    pub delta: f64,
    /// Label weights; must have length `d`.
    pub w: Vec<f64>,
    /// Label bias added for `s = 1`.
    pub bias_s: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.d == 0 {
            return Err(DataError::TooSmall { need: 1, got: 0 });
        }
        if self.n < 4 {
            return Err(DataError::TooSmall {
                need: 4,
                got: self.n,
            });
        }
        if self.w.len() != self.d {
            return Err(DataError::LengthMismatch(alloc::format!(
                "{} weights vs d = {}",
                self.w.len(),
                self.d
            )));
        }
        Ok(())
    }
}

/// Monte-Carlo ground truth attached to a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthGroundTruth {
    /// Rate gap of the Bayes rule `I(w'x + bias_s * s > 0)` estimated from
    /// fresh draws.
    pub bayes_dp: f64,
    pub mc_draws: usize,
}

pub const MC_DRAWS: usize = 1_000_000;

/// Generate the dataset (unsplit) plus its Monte-Carlo ground truth. The
/// ground truth uses an independent stream of `MC_DRAWS` fresh samples.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Dataset, SynthGroundTruth), DataError> {
    spec.validate()?;
    let mut rng = Rng::derive(spec.seed, 1);
    let mut data = Vec::with_capacity(spec.n * spec.d);
    let mut s = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let si = u8::from(rng.bernoulli(0.5));
        let shift = spec.delta * si as f64;
        let mut logit = spec.bias_s * si as f64;
        for j in 0..spec.d {
            let x = rng.normal() + shift;
            logit += spec.w[j] * x;
            data.push(x);
        }
        s.push(si);
        y.push(u8::from(rng.bernoulli(sigmoid(logit))));
    }
    let dataset = Dataset::new(Matrix::from_vec(spec.n, spec.d, data).unwrap(), s, y)?;

    // Bayes rule: predict positive iff w'x + bias_s * s > 0. Estimate its
    // positive rate per group on fresh draws.
    let mut mc = Rng::derive(spec.seed, 2);
    let half = MC_DRAWS / 2;
    let mut rate = [0.0f64; 2];
    for (group, r) in rate.iter_mut().enumerate() {
        let shift = spec.delta * group as f64;
        let bias = spec.bias_s * group as f64;
        let mut hits = 0usize;
        for _ in 0..half {
            let mut logit = bias;
            for &wj in &spec.w {
                logit += wj * (mc.normal() + shift);
            }
            if logit > 0.0 {
                hits += 1;
            }
        }
        *r = hits as f64 / half as f64;
    }
    Ok((
        dataset,
        SynthGroundTruth {
            bayes_dp: math::fabs(rate[0] - rate[1]),
            mc_draws: MC_DRAWS,
        },
    ))
}
