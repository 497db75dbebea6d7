//! Scalar activation and loss primitives shared by every architecture.

use alloc::format;
use alloc::string::String;
use core::fmt;

use crate::math;
use crate::matrix::Matrix;

/// Errors from the batch loss helpers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LossError {
    EmptyBatch,
    ShapeMismatch(String),
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::EmptyBatch => write!(f, "empty batch"),
            LossError::ShapeMismatch(s) => write!(f, "shape mismatch: {}", s),
        }
    }
}

/// Increasing logistic sigmoid `1 / (1 + exp(-x))`, computed branch-wise so
/// it saturates instead of overflowing.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

/// Derivative of [`sigmoid`] expressed through its output value.
#[inline]
pub fn sigmoid_deriv_from_output(s: f64) -> f64 {
    s * (1.0 - s)
}

/// `x` for `x >= 0`, else `slope * x`. The boundary at 0 takes the positive
/// branch.
#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_relu_deriv(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// Per-sample binary cross-entropy from a raw logit:
/// `log(1 + exp(-(2y - 1) * logit))` in the overflow-safe branch form.
#[inline]
pub fn bce_with_logits_one(logit: f64, label: f64) -> f64 {
    let t = (2.0 * label - 1.0) * logit;
    if t >= 0.0 {
        math::ln_1p(math::exp(-t))
    } else {
        -t + math::ln_1p(math::exp(t))
    }
}

/// Mean binary cross-entropy over a batch of logits; labels must be 0/1.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<f64, LossError> {
    if logits.len() != labels.len() {
        return Err(LossError::ShapeMismatch(format!(
            "{} logits vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if logits.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let mut acc = 0.0;
    for (&l, &y) in logits.iter().zip(labels) {
        acc += bce_with_logits_one(l, y);
    }
    Ok(acc / logits.len() as f64)
}

/// Mean over rows of the squared Euclidean distance between matching rows.
pub fn squared_error(x: &Matrix, xhat: &Matrix) -> Result<f64, LossError> {
    if !x.same_shape(xhat) {
        return Err(LossError::ShapeMismatch(format!(
            "{} vs {}",
            x.shape_str(),
            xhat.shape_str()
        )));
    }
    if x.rows() == 0 {
        return Err(LossError::EmptyBatch);
    }
    let mut acc = 0.0;
    for (&a, &b) in x.data().iter().zip(xhat.data()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc / x.rows() as f64)
}
