//! Parameter blocks and the three first-order optimizers exercised by the
//! training loops: plain SGD, Adam, and Adadelta (the default, at learning
//! rate 2.0 with mini-batches of 512).

use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OptimizerKind {
    Adadelta,
    Adam,
    Sgd,
}

/// Hyperparameters for [`step`]. `rho`/`eps` drive Adadelta, `beta1`/`beta2`
/// drive Adam; unrelated fields are ignored by the other kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub rho: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl OptimizerConfig {
    /// Adadelta with learning rate 2.0, rho 0.9, eps 1e-6.
    pub fn adadelta(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adadelta,
            learning_rate,
            rho: 0.9,
            eps: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            rho: 0.9,
            eps: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            rho: 0.9,
            eps: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err("rho must lie in [0, 1)");
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err("eps must be positive");
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adadelta(2.0)
    }
}

/// Per-optimizer accumulators, allocated lazily on the first step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OptState {
    Empty,
    Adadelta {
        avg_sq_grad: Matrix,
        avg_sq_delta: Matrix,
    },
    Adam {
        m: Matrix,
        v: Matrix,
        t: u64,
    },
}

/// A trainable tensor: value, gradient, and optimizer state of one shape.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamBlock {
    pub value: Matrix,
    pub grad: Matrix,
    pub state: OptState,
}

impl ParamBlock {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        ParamBlock {
            value,
            grad,
            state: OptState::Empty,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Apply one update of the configured optimizer to `block`, consuming its
/// current gradient.
pub fn step(block: &mut ParamBlock, config: &OptimizerConfig) {
    update(&mut block.value, &block.grad, &mut block.state, config);
}

/// The update rule itself, usable on bare matrices. Squared-average buffers
/// stay nonnegative by construction.
pub fn update(value: &mut Matrix, grad: &Matrix, state: &mut OptState, config: &OptimizerConfig) {
    debug_assert!(value.same_shape(grad));
    match config.kind {
        OptimizerKind::Sgd => {
            let lr = config.learning_rate;
            for (p, g) in value.data_mut().iter_mut().zip(grad.data()) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam => {
            if !matches!(state, OptState::Adam { .. }) {
                *state = OptState::Adam {
                    m: Matrix::zeros(value.rows(), value.cols()),
                    v: Matrix::zeros(value.rows(), value.cols()),
                    t: 0,
                };
            }
            if let OptState::Adam { m, v, t } = state {
                *t += 1;
                let b1 = config.beta1;
                let b2 = config.beta2;
                let bias1 = 1.0 - math::powi(b1, *t as u32);
                let bias2 = 1.0 - math::powi(b2, *t as u32);
                let lr = config.learning_rate;
                for i in 0..value.data().len() {
                    let g = grad.data()[i];
                    let mi = &mut m.data_mut()[i];
                    *mi = b1 * *mi + (1.0 - b1) * g;
                    let m_hat = *mi / bias1;
                    let vi = &mut v.data_mut()[i];
                    *vi = b2 * *vi + (1.0 - b2) * g * g;
                    let v_hat = *vi / bias2;
                    value.data_mut()[i] -= lr * m_hat / (math::sqrt(v_hat) + config.eps);
                }
            }
        }
        OptimizerKind::Adadelta => {
            if !matches!(state, OptState::Adadelta { .. }) {
                *state = OptState::Adadelta {
                    avg_sq_grad: Matrix::zeros(value.rows(), value.cols()),
                    avg_sq_delta: Matrix::zeros(value.rows(), value.cols()),
                };
            }
            if let OptState::Adadelta {
                avg_sq_grad,
                avg_sq_delta,
            } = state
            {
                let rho = config.rho;
                let eps = config.eps;
                let lr = config.learning_rate;
                for i in 0..value.data().len() {
                    let g = grad.data()[i];
                    let acc_g = &mut avg_sq_grad.data_mut()[i];
                    *acc_g = rho * *acc_g + (1.0 - rho) * g * g;
                    let acc_d = &mut avg_sq_delta.data_mut()[i];
                    let delta = math::sqrt(*acc_d + eps) / math::sqrt(*acc_g + eps) * g;
                    *acc_d = rho * *acc_d + (1.0 - rho) * delta * delta;
                    value.data_mut()[i] -= lr * delta;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn block_with_grad(p: f64, g: f64) -> ParamBlock {
        let mut b = ParamBlock::new(Matrix::from_vec(1, 1, vec![p]).unwrap());
        b.grad = Matrix::from_vec(1, 1, vec![g]).unwrap();
        b
    }

    #[test]
    fn adadelta_first_step_matches_hand_evaluation() {
        // rho 0.9, eps 1e-6, g = 1, lr = 2:
        // acc_g = 0.1; delta = sqrt(1e-6)/sqrt(0.1 + 1e-6);
        // update = -lr * delta
        let mut b = block_with_grad(0.0, 1.0);
        let cfg = OptimizerConfig::adadelta(2.0);
        step(&mut b, &cfg);
        let expected = -2.0 * (1e-6f64).sqrt() / (0.1f64 + 1e-6).sqrt();
        let got = b.value.data()[0];
        assert!(
            (got - expected).abs() < 1e-15,
            "got {got}, expected {expected}"
        );
        assert!((got + 6.3245e-3).abs() < 1e-7);
    }

    #[test]
    fn sgd_step_is_definition() {
        let mut b = block_with_grad(0.0, 1.0);
        step(&mut b, &OptimizerConfig::sgd(0.1));
        assert_eq!(b.value.data()[0], -0.1);
    }

    #[test]
    fn zero_gradient_is_identity_from_fresh_state() {
        for cfg in [
            OptimizerConfig::adadelta(2.0),
            OptimizerConfig::adam(0.01),
            OptimizerConfig::sgd(0.5),
        ] {
            let mut b = block_with_grad(1.25, 0.0);
            step(&mut b, &cfg);
            assert_eq!(b.value.data()[0], 1.25, "{:?}", cfg.kind);
            // and stays fixed across repeated zero-grad steps
            for _ in 0..5 {
                step(&mut b, &cfg);
            }
            assert_eq!(b.value.data()[0], 1.25, "{:?}", cfg.kind);
        }
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut b = block_with_grad(1.0, 1.0);
        let cfg = OptimizerConfig::adam(0.1);
        step(&mut b, &cfg);
        // first Adam step is -lr * g / (|g| + eps) ~ -lr
        assert!((b.value.data()[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn squared_average_buffers_stay_nonnegative() {
        let mut b = block_with_grad(0.0, -3.0);
        let cfg = OptimizerConfig::adadelta(1.0);
        for i in 0..50 {
            b.grad = Matrix::from_vec(1, 1, vec![if i % 2 == 0 { -3.0 } else { 2.0 }]).unwrap();
            step(&mut b, &cfg);
            if let OptState::Adadelta {
                avg_sq_grad,
                avg_sq_delta,
            } = &b.state
            {
                assert!(avg_sq_grad.data()[0] >= 0.0);
                assert!(avg_sq_delta.data()[0] >= 0.0);
            } else {
                panic!("state kind changed");
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = OptimizerConfig::adadelta(2.0);
        assert!(c.validate().is_ok());
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        c.learning_rate = 1.0;
        c.rho = 1.0;
        assert!(c.validate().is_err());
    }
}
