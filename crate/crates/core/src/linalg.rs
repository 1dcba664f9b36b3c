//! Closed-form linear algebra for the 1x1 and 2x2 matrices that appear as
//! Fisher information in this crate.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Determinants smaller than this in magnitude are treated as singular.
pub const DET_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    dim: usize,
    a: [[f64; 2]; 2],
}

impl Mat {
    pub fn scalar(v: f64) -> Self {
        Mat { dim: 1, a: [[v, 0.0], [0.0, 0.0]] }
    }

    pub fn new2(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        Mat { dim: 2, a: [[a00, a01], [a10, a11]] }
    }

    pub fn diag2(a: f64, b: f64) -> Self {
        Self::new2(a, 0.0, 0.0, b)
    }

    pub fn identity(dim: usize) -> Self {
        Self::zeros(dim).map_diag(|_| 1.0)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only d <= 2 is supported");
        Mat { dim, a: [[0.0; 2]; 2] }
    }

    /// Build from a row-major slice of length `dim * dim`.
    pub fn from_rows(dim: usize, values: &[f64]) -> Result<Self> {
        match (dim, values.len()) {
            (1, 1) => Ok(Self::scalar(values[0])),
            (2, 4) => Ok(Self::new2(values[0], values[1], values[2], values[3])),
            _ => Err(Error::InvalidConfig(format!(
                "matrix of dim {dim} needs {} entries, got {}",
                dim * dim,
                values.len()
            ))),
        }
    }

    fn map_diag(mut self, f: impl Fn(f64) -> f64) -> Self {
        for i in 0..self.dim {
            self.a[i][i] = f(self.a[i][i]);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim);
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.dim && j < self.dim);
        self.a[i][j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.a[i][..self.dim].to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = *self;
        t.a[0][1] = self.a[1][0];
        t.a[1][0] = self.a[0][1];
        t
    }

    pub fn add(&self, other: &Mat) -> Self {
        self.zip(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Mat) -> Self {
        self.zip(other, |x, y| x - y)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.zip(self, |x, _| s * x)
    }

    fn zip(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut out = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.a[i][j] = f(self.a[i][j], other.a[i][j]);
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut out = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.a[i][j] = (0..self.dim).map(|k| self.a[i][k] * other.a[k][j]).sum();
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.a[0][0],
            _ => self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0],
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !det.is_finite() || det.abs() < DET_GUARD {
            return Err(Error::Singular { det });
        }
        Ok(match self.dim {
            1 => Mat::scalar(1.0 / det),
            _ => Mat::new2(self.a[1][1] / det, -self.a[0][1] / det, -self.a[1][0] / det, self.a[0][0] / det),
        })
    }

    pub fn asymmetry(&self) -> f64 {
        (self.a[0][1] - self.a[1][0]).abs()
    }

    /// Symmetric part `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = *self;
        if self.dim == 2 {
            let off = 0.5 * (self.a[0][1] + self.a[1][0]);
            s.a[0][1] = off;
            s.a[1][0] = off;
        }
        s
    }

    /// Eigenvalues of a symmetric matrix in ascending order (quadratic formula for d = 2).
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.a[0][0]],
            _ => {
                let half_tr = 0.5 * (self.a[0][0] + self.a[1][1]);
                let half_diff = 0.5 * (self.a[0][0] - self.a[1][1]);
                let off = 0.5 * (self.a[0][1] + self.a[1][0]);
                let r = half_diff.hypot(off);
                vec![half_tr - r, half_tr + r]
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues()[0]
    }
}
