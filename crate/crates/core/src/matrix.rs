//! Dense row-major `f64` matrices, sized for desk-scale batches of tabular
//! data rather than BLAS-level workloads.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// A dense `rows x cols` matrix of 64-bit floats, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Shape error carrying both offending shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeError(pub String);

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shape mismatch: {}", self.0)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ShapeError> {
        if data.len() != rows * cols {
            return Err(ShapeError(format!(
                "buffer of {} entries cannot fill {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ShapeError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(ShapeError(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    c
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, ShapeError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, ShapeError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix, ShapeError> {
        if !self.same_shape(other) {
            return Err(ShapeError(format!(
                "{} vs {}",
                self.shape_str(),
                other.shape_str()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `self (n x k) * other^T (k x m)` where `other` is `m x k`.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix, ShapeError> {
        if self.cols != other.cols {
            return Err(ShapeError(format!(
                "{} * transpose({})",
                self.shape_str(),
                other.shape_str()
            )));
        }
        let (n, m) = (self.rows, other.rows);
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            let a = self.row(i);
            let or = &mut out.data[i * m..(i + 1) * m];
            for (j, o) in or.iter_mut().enumerate() {
                let b = other.row(j);
                let mut acc = 0.0;
                for (av, bv) in a.iter().zip(b) {
                    acc += av * bv;
                }
                *o = acc;
            }
        }
        Ok(out)
    }

    /// `self^T (k x n) * other (n x m)` where `self` is `n x k`.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix, ShapeError> {
        if self.rows != other.rows {
            return Err(ShapeError(format!(
                "transpose({}) * {}",
                self.shape_str(),
                other.shape_str()
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(k, m);
        for i in 0..n {
            let a = self.row(i);
            let b = &other.data[i * m..(i + 1) * m];
            for (t, &av) in a.iter().enumerate() {
                let or = &mut out.data[t * m..(t + 1) * m];
                for (o, bv) in or.iter_mut().zip(b) {
                    *o += av * bv;
                }
            }
        }
        Ok(out)
    }

    /// Plain `self (n x k) * other (k x m)`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, ShapeError> {
        if self.cols != other.rows {
            return Err(ShapeError(format!(
                "{} * {}",
                self.shape_str(),
                other.shape_str()
            )));
        }
        let (n, m) = (self.rows, other.cols);
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            let a = self.row(i);
            let or = &mut out.data[i * m..(i + 1) * m];
            for (t, &av) in a.iter().enumerate() {
                let b = &other.data[t * m..(t + 1) * m];
                for (o, bv) in or.iter_mut().zip(b) {
                    *o += av * bv;
                }
            }
        }
        Ok(out)
    }

    /// Sum down each column, yielding a length-`cols` vector.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    /// Gather the given rows into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Append `extra` as an additional final column.
    pub fn append_column(&self, extra: &[f64]) -> Result<Matrix, ShapeError> {
        if extra.len() != self.rows {
            return Err(ShapeError(format!(
                "column of {} entries onto {}",
                extra.len(),
                self.shape_str()
            )));
        }
        let mut data = Vec::with_capacity(self.rows * (self.cols + 1));
        for (i, &v) in extra.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(v);
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols + 1,
            data,
        })
    }
}
