//! The fixed architecture zoo: a single-layer leaky-ReLU encoder, an affine
//! decoder back to feature space, and four scalar prediction heads (linear,
//! one leaky-ReLU layer, one sigmoid layer, two sigmoid layers). Hidden
//! widths equal the representation dimension.

use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{NodeId, Tape, TapeError};
use crate::func;
use crate::math;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Default negative-side slope of the leaky-ReLU activation.
pub const DEFAULT_SLOPE: f64 = 0.01;

fn init_matrix(rows: usize, cols: usize, fan_in: usize, rng: &mut Rng) -> Matrix {
    let bound = 1.0 / math::sqrt(fan_in as f64);
    let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Encoder `x -> leaky_relu(W x + b)`, mapping `d_in` inputs (the sensitive
/// bit may be concatenated) to an `m`-dimensional representation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderParams {
    pub w: Matrix,
    pub b: Matrix,
    pub slope: f64,
}

impl EncoderParams {
    pub fn init(m: usize, d_in: usize, slope: f64, rng: &mut Rng) -> Self {
        EncoderParams {
            w: init_matrix(m, d_in, d_in, rng),
            b: init_matrix(m, 1, d_in, rng),
            slope,
        }
    }

    pub fn rep_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }
}

/// Decoder `z -> W z + b` reconstructing the raw feature vector only.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecoderParams {
    pub w: Matrix,
    pub b: Matrix,
}

impl DecoderParams {
    pub fn init(d: usize, m: usize, rng: &mut Rng) -> Self {
        DecoderParams {
            w: init_matrix(d, m, m, rng),
            b: init_matrix(d, 1, m, rng),
        }
    }
}

/// Prediction-head architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HeadArch {
    Linear,
    LeakyRelu1,
    Sigmoid1,
    Sigmoid2,
}

impl HeadArch {
    pub const ALL: [HeadArch; 4] = [
        HeadArch::Linear,
        HeadArch::LeakyRelu1,
        HeadArch::Sigmoid1,
        HeadArch::Sigmoid2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeadArch::Linear => "linear",
            HeadArch::LeakyRelu1 => "leakyrelu1",
            HeadArch::Sigmoid1 => "sigmoid1",
            HeadArch::Sigmoid2 => "sigmoid2",
        }
    }

    pub fn parse(name: &str) -> Option<HeadArch> {
        match name {
            "linear" => Some(HeadArch::Linear),
            "leakyrelu1" => Some(HeadArch::LeakyRelu1),
            "sigmoid1" => Some(HeadArch::Sigmoid1),
            "sigmoid2" => Some(HeadArch::Sigmoid2),
            _ => None,
        }
    }

    fn hidden_layers(self) -> usize {
        match self {
            HeadArch::Linear => 0,
            HeadArch::LeakyRelu1 | HeadArch::Sigmoid1 => 1,
            HeadArch::Sigmoid2 => 2,
        }
    }
}

/// Scalar-output prediction head; hidden layers (if any) have width equal to
/// the input dimension.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeadParams {
    pub arch: HeadArch,
    pub slope: f64,
    /// Hidden layers then the final affine layer, each `(W, b)`.
    pub layers: Vec<(Matrix, Matrix)>,
}

impl HeadParams {
    pub fn init(arch: HeadArch, m: usize, slope: f64, rng: &mut Rng) -> Self {
        let mut layers = Vec::new();
        for _ in 0..arch.hidden_layers() {
            layers.push((init_matrix(m, m, m, rng), init_matrix(m, 1, m, rng)));
        }
        layers.push((init_matrix(1, m, m, rng), init_matrix(1, 1, m, rng)));
        HeadParams { arch, slope, layers }
    }
}

/// Concatenate the sensitive bit as an extra input column when requested.
pub fn encoder_input(x: &Matrix, s: &[u8], include_s: bool) -> Result<Matrix, String> {
    if include_s {
        let col: Vec<f64> = s.iter().map(|&v| v as f64).collect();
        x.append_column(&col).map_err(|e| e.0)
    } else {
        Ok(x.clone())
    }
}

/// Direct (non-tape) encoder forward pass: `leaky_relu(affine(W, b, [x|s?]))`
/// rowwise.
pub fn encode(
    enc: &EncoderParams,
    x: &Matrix,
    s: &[u8],
    include_s: bool,
) -> Result<Matrix, String> {
    let input = encoder_input(x, s, include_s)?;
    let mut out = input.matmul_nt(&enc.w).map_err(|e| e.0)?;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            let v = out.at(i, j) + enc.b.at(j, 0);
            *out.at_mut(i, j) = func::leaky_relu(v, enc.slope);
        }
    }
    Ok(out)
}

/// Direct head forward pass producing one logit per row.
pub fn head_logits(head: &HeadParams, z: &Matrix) -> Result<Vec<f64>, String> {
    let mut cur = z.clone();
    let n_layers = head.layers.len();
    for (li, (w, b)) in head.layers.iter().enumerate() {
        let mut out = cur.matmul_nt(w).map_err(|e| e.0)?;
        let last = li + 1 == n_layers;
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let mut v = out.at(i, j) + b.at(j, 0);
                if !last {
                    v = match head.arch {
                        HeadArch::LeakyRelu1 => func::leaky_relu(v, head.slope),
                        HeadArch::Sigmoid1 | HeadArch::Sigmoid2 => func::sigmoid(v),
                        HeadArch::Linear => v,
                    };
                }
                *out.at_mut(i, j) = v;
            }
        }
        cur = out;
    }
    Ok(cur.data().to_vec())
}

/// Direct decoder forward pass.
pub fn decode(dec: &DecoderParams, z: &Matrix) -> Result<Matrix, String> {
    let mut out = z.matmul_nt(&dec.w).map_err(|e| e.0)?;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            *out.at_mut(i, j) += dec.b.at(j, 0);
        }
    }
    Ok(out)
}

/// Tape handles for one parameter matrix/bias pair.
#[derive(Debug, Clone, Copy)]
pub struct LayerNodes {
    pub w: NodeId,
    pub b: NodeId,
}

/// Encoder recorded on a tape; returns the parameter leaves and the
/// representation node.
pub struct EncoderGraph {
    pub layer: LayerNodes,
    pub z: NodeId,
}

pub fn encoder_graph(
    tape: &mut Tape,
    enc: &EncoderParams,
    input: NodeId,
) -> Result<EncoderGraph, TapeError> {
    let w = tape.leaf(enc.w.clone());
    let b = tape.leaf(enc.b.clone());
    let pre = tape.affine(w, b, input)?;
    let z = tape.leaky_relu(pre, enc.slope);
    Ok(EncoderGraph {
        layer: LayerNodes { w, b },
        z,
    })
}

/// Head recorded on a tape; returns parameter leaves per layer and the
/// `n x 1` logit node.
pub struct HeadGraph {
    pub layers: Vec<LayerNodes>,
    pub logits: NodeId,
}

pub fn head_graph(tape: &mut Tape, head: &HeadParams, z: NodeId) -> Result<HeadGraph, TapeError> {
    let mut layers = Vec::new();
    let mut cur = z;
    let n_layers = head.layers.len();
    for (li, (w, b)) in head.layers.iter().enumerate() {
        let wn = tape.leaf(w.clone());
        let bn = tape.leaf(b.clone());
        layers.push(LayerNodes { w: wn, b: bn });
        cur = tape.affine(wn, bn, cur)?;
        if li + 1 != n_layers {
            cur = match head.arch {
                HeadArch::LeakyRelu1 => tape.leaky_relu(cur, head.slope),
                HeadArch::Sigmoid1 | HeadArch::Sigmoid2 => tape.sigmoid(cur),
                HeadArch::Linear => cur,
            };
        }
    }
    Ok(HeadGraph { layers, logits: cur })
}

/// Decoder recorded on a tape.
pub struct DecoderGraph {
    pub layer: LayerNodes,
    pub xhat: NodeId,
}

pub fn decoder_graph(
    tape: &mut Tape,
    dec: &DecoderParams,
    z: NodeId,
) -> Result<DecoderGraph, TapeError> {
    let w = tape.leaf(dec.w.clone());
    let b = tape.leaf(dec.b.clone());
    let xhat = tape.affine(w, b, z)?;
    Ok(DecoderGraph {
        layer: LayerNodes { w, b },
        xhat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_encoder_maps_to_zero() {
        let enc = EncoderParams {
            w: Matrix::zeros(2, 3),
            b: Matrix::zeros(2, 1),
            slope: DEFAULT_SLOPE,
        };
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.5, 0.5]).unwrap();
        let z = encode(&enc, &x, &[0, 1], false).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_like_encoder_selects_columns() {
        // W = [I | 0] with include_s and nonnegative X passes X through.
        let mut w = Matrix::zeros(2, 3);
        *w.at_mut(0, 0) = 1.0;
        *w.at_mut(1, 1) = 1.0;
        let enc = EncoderParams {
            w,
            b: Matrix::zeros(2, 1),
            slope: DEFAULT_SLOPE,
        };
        let x = Matrix::from_vec(2, 2, vec![0.3, 0.7, 1.2, 0.0]).unwrap();
        let z = encode(&enc, &x, &[1, 0], true).unwrap();
        assert_eq!(z.data(), x.data());
    }

    #[test]
    fn single_row_hand_evaluation() {
        // m = 1: z = leaky(0.5 * 2 + (-2)) = leaky(-1) = -0.01
        let enc = EncoderParams {
            w: Matrix::from_vec(1, 1, vec![0.5]).unwrap(),
            b: Matrix::from_vec(1, 1, vec![-2.0]).unwrap(),
            slope: 0.01,
        };
        let x = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let z = encode(&enc, &x, &[0], false).unwrap();
        assert!((z.data()[0] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn head_graph_matches_direct_forward() {
        let mut rng = Rng::new(4);
        let z = Matrix::from_vec(5, 3, (0..15).map(|_| rng.normal()).collect()).unwrap();
        for arch in HeadArch::ALL {
            let head = HeadParams::init(arch, 3, DEFAULT_SLOPE, &mut rng);
            let direct = head_logits(&head, &z).unwrap();
            let mut tape = Tape::new();
            let zn = tape.leaf(z.clone());
            let graph = head_graph(&mut tape, &head, zn).unwrap();
            assert_eq!(tape.value(graph.logits).data(), direct.as_slice());
            assert_eq!(
                head.layers.len(),
                match arch {
                    HeadArch::Linear => 1,
                    HeadArch::LeakyRelu1 | HeadArch::Sigmoid1 => 2,
                    HeadArch::Sigmoid2 => 3,
                }
            );
        }
    }

    #[test]
    fn encoder_graph_matches_direct_forward() {
        let mut rng = Rng::new(8);
        let enc = EncoderParams::init(4, 3, DEFAULT_SLOPE, &mut rng);
        let x = Matrix::from_vec(6, 3, (0..18).map(|_| rng.normal()).collect()).unwrap();
        let s = [0u8, 1, 0, 1, 1, 0];
        let direct = encode(&enc, &x, &s, false).unwrap();
        let mut tape = Tape::new();
        let xn = tape.leaf(x.clone());
        let g = encoder_graph(&mut tape, &enc, xn).unwrap();
        assert_eq!(tape.value(g.z), &direct);
    }

    #[test]
    fn decoder_graph_matches_direct_forward() {
        let mut rng = Rng::new(2);
        let dec = DecoderParams::init(3, 2, &mut rng);
        let z = Matrix::from_vec(4, 2, (0..8).map(|_| rng.normal()).collect()).unwrap();
        let direct = decode(&dec, &z).unwrap();
        let mut tape = Tape::new();
        let zn = tape.leaf(z.clone());
        let g = decoder_graph(&mut tape, &dec, zn).unwrap();
        assert_eq!(tape.value(g.xhat), &direct);
    }

    #[test]
    fn arch_names_round_trip() {
        for arch in HeadArch::ALL {
            assert_eq!(HeadArch::parse(arch.name()), Some(arch));
        }
        assert_eq!(HeadArch::parse("rbf-svm"), None);
    }
}
