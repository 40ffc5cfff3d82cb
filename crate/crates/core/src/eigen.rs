//! Cyclic Jacobi eigensolver for small dense symmetric matrices.
//!
//! Pivots are visited in row-major order `(0,1), (0,2), …, (n-2,n-1)` and
//! sweeps repeat until the off-diagonal Frobenius mass drops below
//! `OFF_DIAGONAL_THRESHOLD` relative to the matrix norm.

use crate::matrix::SymmetricMatrix;
use crate::operator::Spectrum;

pub const OFF_DIAGONAL_THRESHOLD: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

impl Eigen {
    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_sorted_unchecked(self.values.clone())
    }

    /// `Q diag(f(λ)) Qᵀ`
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        SymmetricMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| mapped[k] * self.vectors[k][i] * self.vectors[k][j])
                .sum()
        })
    }

    /// Frame as a row-major matrix whose columns are the eigenvectors.
    pub fn frame(&self) -> Vec<Vec<f64>> {
        let n = self.values.len();
        (0..n)
            .map(|i| (0..n).map(|k| self.vectors[k][i]).collect())
            .collect()
    }

    /// `‖QᵀQ − I‖∞` (max entry).
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.values.len();
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|i| self.vectors[a][i] * self.vectors[b][i]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

pub fn jacobi_eigen(m: &SymmetricMatrix) -> Eigen {
    let n = m.dim();
    let mut a = m.to_rows();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let norm = m.frobenius_norm();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= OFF_DIAGONAL_THRESHOLD * norm || off == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p][p];
                let aqq = a[q][q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // A ← Jᵀ A J restricted to rows/cols p and q
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;

                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    Eigen {
        values: order.iter().map(|&k| a[k][k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|i| v[i][k]).collect())
            .collect(),
        sweeps,
    }
}
