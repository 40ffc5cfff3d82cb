//! Dense real symmetric matrices.
//!
//! Storage keeps only the upper triangle (row-major, packed), so every
//! matrix built through this type is exactly symmetric.

use serde::{Deserialize, Serialize};

use crate::eigen::{jacobi_eigen, Eigen};
use crate::error::{Error, Result};
use crate::operator::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    n: usize,
    upper: Vec<f64>,
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..r contribute n + (n-1) + ... + (n-r+1) entries
    r * n - r * r.saturating_sub(1) / 2 + (c - r)
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    /// `a * I`
    pub fn scalar(n: usize, a: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, a);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Symmetrizes a square row-major array as `(A + Aᵀ)/2`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("empty matrix"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix rows must all have length n"));
        }
        Ok(Self::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i])))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = packed_index(self.n, i, j);
        self.upper[k] = value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Self {
            n: self.n,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|v| a * v).collect(),
        }
    }

    /// `self + a * I`
    pub fn shift(&self, a: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.set(i, i, m.get(i, i) + a);
        }
        m
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                sum += v * v;
            }
        }
        sum.sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `xᵀ M x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `Qᵀ M Q` for a square row-major `q`.
    pub fn congruence(&self, q: &[Vec<f64>]) -> Self {
        let n = self.n;
        assert_eq!(q.len(), n, "dimension mismatch");
        // mq = M Q
        let mut mq = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                mq[i][j] = (0..n).map(|k| self.get(i, k) * q[k][j]).sum();
            }
        }
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[k][i] * mq[k][j]).sum();
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn eigen(&self) -> Eigen {
        jacobi_eigen(self)
    }

    pub fn spectrum(&self) -> Spectrum {
        self.eigen().spectrum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().values[self.n - 1]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().values[0]
    }

    /// Applies a scalar function to the spectrum: `Q diag(f(λ)) Qᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        self.eigen().reassemble(f)
    }

    /// Inverse through the spectral decomposition.
    pub fn inverse(&self) -> Result<Self> {
        let eig = self.eigen();
        let scale = eig.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if eig
            .values
            .iter()
            .any(|v| v.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE))
        {
            return Err(Error::Degenerate("matrix is singular".into()));
        }
        Ok(eig.reassemble(|v| 1.0 / v))
    }
}

/// Solves `A x = b` for a square row-major `A` with partial pivoting.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular linear system".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..n {
                    m[row][k] -= factor * m[col][k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// Product of two square row-major matrices.
pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let p = b[0].len();
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..b.len() {
            let aik = a[i][k];
            for j in 0..p {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}
