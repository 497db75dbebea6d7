//! Fair representation learning with a parametric sigmoid-IPM adversary.
//!
//! The crate is organized around the pipeline: encode tabular inputs into a
//! representation, push the two sensitive-group representation distributions
//! together by adversarial training against the discriminator family
//! `{z -> sigmoid(theta' z + mu)}`, then fit prediction heads on top and
//! score the fairness/accuracy trade-off.
//!
//! Modules:
//! - [`matrix`]: dense row-major `f64` matrices.
//! - [`rng`]: a small splittable PRNG with bit-stable output across platforms.
//! - [`func`]: scalar activation/loss primitives.
//! - [`autodiff`]: a tape over the fixed op set used by every model here.
//! - [`optim`]: SGD / Adam / Adadelta parameter updates.
//! - [`ipm`]: the sigmoid-IPM fairness deviance, its adversarial ascent
//!   estimator, and a brute-force grid oracle.
//! - [`model`]: encoder / decoder / prediction-head parameter records.
//! - [`train`]: the min-max training loops (supervised, unsupervised,
//!   downstream) and checkpoint selection.
//! - [`metrics`]: demographic-parity gap family, EOpp/EO, accuracy, and
//!   Pareto-front extraction.
//! - [`dataset`]: split/standardize plumbing and a synthetic generator with
//!   Monte-Carlo ground truth.
//! - [`theory`]: executable checks of the moment-witness constructions and
//!   the projected-CDF surrogate, bundled into a verification suite.
//!
//! All computation is deterministic: every random choice flows from an
//! explicit seed through [`rng::Rng`], and all transcendental functions go
//! through `libm` so results are bit-identical across platforms.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the CLI live
//! in the companion `fairrep` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod dataset;
pub mod func;
pub mod ipm;
mod math;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod theory;
pub mod train;

pub use matrix::Matrix;
pub use rng::Rng;
