//! Reverse-mode differentiation over a recorded forward pass.
//!
//! The tape supports exactly the op set the architectures here are built
//! from: affine layers, leaky-ReLU and sigmoid activations, the two batch
//! losses, means, absolute value, row gathering, and scalar combination.
//! The op enum is closed, so every recorded node is differentiable by
//! construction.
//!
//! Subgradient conventions, pinned by tests: `d|x|/dx = 0` at `x = 0`, and
//! the leaky-ReLU derivative at 0 takes the positive branch (slope 1).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::func;
use crate::matrix::Matrix;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    /// Position of the node on the tape; indexes the gradient list returned
    /// by [`Tape::backward`].
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Rowwise `W x_i + b`: value is `X * W^T + 1 b^T`.
    Affine { w: NodeId, b: NodeId, x: NodeId },
    LeakyRelu { x: NodeId, slope: f64 },
    Sigmoid { x: NodeId },
    /// Mean over all entries.
    Mean { x: NodeId },
    /// Absolute value of a scalar node.
    Abs { x: NodeId },
    /// Gather rows of `x`.
    SelectRows { x: NodeId, rows: Vec<usize> },
    /// Mean over samples of `log(1 + exp(-(2y-1) logit))`; labels constant.
    BceWithLogits { logits: NodeId, labels: Vec<f64> },
    /// Mean over rows of squared row distance to a constant target.
    SquaredError { pred: NodeId, target: Matrix },
    /// `a + c * b` on scalars.
    AddScaled { a: NodeId, b: NodeId, c: f64 },
    /// `a - b` on scalars.
    Sub { a: NodeId, b: NodeId },
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Errors raised while recording the forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapeError(pub String);

impl fmt::Display for TapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tape error: {}", self.0)
    }
}

/// A recorded forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.data().len(), 1);
        self.nodes[id.0].value.data()[0]
    }

    /// Insert an input or parameter leaf.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn scalar_leaf(&mut self, v: f64) -> NodeId {
        let m = Matrix::from_vec(1, 1, alloc::vec![v]).unwrap();
        self.leaf(m)
    }

    /// Rowwise affine map: `out_i = W x_i + b` for each row `x_i` of `x`.
    /// `w` is `out_dim x in_dim`, `b` is `out_dim x 1`.
    pub fn affine(&mut self, w: NodeId, b: NodeId, x: NodeId) -> Result<NodeId, TapeError> {
        let (wv, bv, xv) = (&self.nodes[w.0].value, &self.nodes[b.0].value, &self.nodes[x.0].value);
        if wv.cols() != xv.cols() {
            return Err(TapeError(format!(
                "affine weights {} against inputs {}",
                wv.shape_str(),
                xv.shape_str()
            )));
        }
        if bv.rows() != wv.rows() || bv.cols() != 1 {
            return Err(TapeError(format!(
                "affine bias {} against weights {}",
                bv.shape_str(),
                wv.shape_str()
            )));
        }
        let mut out = xv.matmul_nt(wv).map_err(|e| TapeError(e.0))?;
        let m = out.cols();
        for i in 0..out.rows() {
            for j in 0..m {
                *out.at_mut(i, j) += bv.at(j, 0);
            }
        }
        Ok(self.push(Op::Affine { w, b, x }, out))
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let out = self.nodes[x.0].value.map(|v| func::leaky_relu(v, slope));
        self.push(Op::LeakyRelu { x, slope }, out)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x.0].value.map(func::sigmoid);
        self.push(Op::Sigmoid { x }, out)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let v = &self.nodes[x.0].value;
        let n = v.data().len();
        let m = v.data().iter().sum::<f64>() / n as f64;
        let out = Matrix::from_vec(1, 1, alloc::vec![m]).unwrap();
        self.push(Op::Mean { x }, out)
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let v = self.scalar(x);
        let out = Matrix::from_vec(1, 1, alloc::vec![crate::math::fabs(v)]).unwrap();
        self.push(Op::Abs { x }, out)
    }

    pub fn select_rows(&mut self, x: NodeId, rows: Vec<usize>) -> NodeId {
        let out = self.nodes[x.0].value.select_rows(&rows);
        self.push(Op::SelectRows { x, rows }, out)
    }

    /// `logits` must be `n x 1`; labels constant 0/1.
    pub fn bce_with_logits(&mut self, logits: NodeId, labels: Vec<f64>) -> Result<NodeId, TapeError> {
        let lv = &self.nodes[logits.0].value;
        if lv.cols() != 1 || lv.rows() != labels.len() || labels.is_empty() {
            return Err(TapeError(format!(
                "bce over logits {} with {} labels",
                lv.shape_str(),
                labels.len()
            )));
        }
        let loss = func::bce_with_logits(lv.data(), &labels).map_err(|e| TapeError(format!("{}", e)))?;
        let out = Matrix::from_vec(1, 1, alloc::vec![loss]).unwrap();
        Ok(self.push(Op::BceWithLogits { logits, labels }, out))
    }

    pub fn squared_error(&mut self, pred: NodeId, target: Matrix) -> Result<NodeId, TapeError> {
        let pv = &self.nodes[pred.0].value;
        let loss = func::squared_error(pv, &target).map_err(|e| TapeError(format!("{}", e)))?;
        let out = Matrix::from_vec(1, 1, alloc::vec![loss]).unwrap();
        Ok(self.push(Op::SquaredError { pred, target }, out))
    }

    /// Scalar `a + c * b`.
    pub fn add_scaled(&mut self, a: NodeId, b: NodeId, c: f64) -> NodeId {
        let v = self.scalar(a) + c * self.scalar(b);
        let out = Matrix::from_vec(1, 1, alloc::vec![v]).unwrap();
        self.push(Op::AddScaled { a, b, c }, out)
    }

    /// Scalar `a - b`.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.scalar(a) - self.scalar(b);
        let out = Matrix::from_vec(1, 1, alloc::vec![v]).unwrap();
        self.push(Op::Sub { a, b }, out)
    }

    /// Reverse pass from `root` (a scalar node), seeding with `seed_grad`.
    /// Returns one gradient per node, shaped like the node's value.
    pub fn backward(&self, root: NodeId, seed_grad: f64) -> Vec<Matrix> {
        let mut grads: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        *grads[root.0].at_mut(0, 0) = seed_grad;

        for idx in (0..self.nodes.len()).rev() {
            let g = grads[idx].clone();
            if g.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Affine { w, b, x } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    // dX = G * W ; dW = G^T * X ; db = column sums of G
                    let dx = g.matmul(wv).unwrap();
                    grads[x.0].add_assign(&dx);
                    let dw = g.matmul_tn(xv).unwrap();
                    grads[w.0].add_assign(&dw);
                    let db = g.col_sums();
                    let gb = &mut grads[b.0];
                    for (j, v) in db.iter().enumerate() {
                        *gb.at_mut(j, 0) += v;
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = &self.nodes[x.0].value;
                    let gx = &mut grads[x.0];
                    for i in 0..g.data().len() {
                        gx.data_mut()[i] +=
                            g.data()[i] * func::leaky_relu_deriv(xv.data()[i], *slope);
                    }
                }
                Op::Sigmoid { x } => {
                    let sv = &self.nodes[idx].value;
                    let gx = &mut grads[x.0];
                    for i in 0..g.data().len() {
                        gx.data_mut()[i] +=
                            g.data()[i] * func::sigmoid_deriv_from_output(sv.data()[i]);
                    }
                }
                Op::Mean { x } => {
                    let n = self.nodes[x.0].value.data().len() as f64;
                    let gv = g.data()[0] / n;
                    for v in grads[x.0].data_mut() {
                        *v += gv;
                    }
                }
                Op::Abs { x } => {
                    let xv = self.nodes[x.0].value.data()[0];
                    let sign = if xv > 0.0 {
                        1.0
                    } else if xv < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    grads[x.0].data_mut()[0] += g.data()[0] * sign;
                }
                Op::SelectRows { x, rows } => {
                    let cols = g.cols();
                    let gx = &mut grads[x.0];
                    for (out_r, &src_r) in rows.iter().enumerate() {
                        for j in 0..cols {
                            *gx.at_mut(src_r, j) += g.at(out_r, j);
                        }
                    }
                }
                Op::BceWithLogits { logits, labels } => {
                    let lv = &self.nodes[logits.0].value;
                    let n = labels.len() as f64;
                    let gv = g.data()[0];
                    let gl = &mut grads[logits.0];
                    for (i, &label) in labels.iter().enumerate() {
                        let p = func::sigmoid(lv.data()[i]);
                        gl.data_mut()[i] += gv * (p - label) / n;
                    }
                }
                Op::SquaredError { pred, target } => {
                    let pv = &self.nodes[pred.0].value;
                    let n = pv.rows() as f64;
                    let gv = g.data()[0];
                    let gp = &mut grads[pred.0];
                    for i in 0..pv.data().len() {
                        gp.data_mut()[i] += gv * 2.0 * (pv.data()[i] - target.data()[i]) / n;
                    }
                }
                Op::AddScaled { a, b, c } => {
                    grads[a.0].data_mut()[0] += g.data()[0];
                    grads[b.0].data_mut()[0] += g.data()[0] * c;
                }
                Op::Sub { a, b } => {
                    grads[a.0].data_mut()[0] += g.data()[0];
                    grads[b.0].data_mut()[0] -= g.data()[0];
                }
            }
        }
        grads
    }
}
