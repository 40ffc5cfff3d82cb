//! Seeded random test data. Every generator takes an explicit RNG so runs are
//! reproducible from a single `u64` seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::{mat_mul, SymmetricMatrix};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal via Box–Muller.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Haar-ish orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        for q in &cols {
            let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
    }
    // row-major with the generated vectors as columns
    (0..n).map(|i| (0..n).map(|k| cols[k][i]).collect()).collect()
}

/// `Q diag(eigs) Qᵀ` for a random orthogonal `Q`.
pub fn symmetric_with_spectrum(eigs: &[f64], rng: &mut impl Rng) -> SymmetricMatrix {
    let n = eigs.len();
    let q = random_orthogonal(n, rng);
    let scaled: Vec<Vec<f64>> = q
        .iter()
        .map(|row| row.iter().zip(eigs).map(|(a, e)| a * e).collect())
        .collect();
    let qt: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| q[j][i]).collect()).collect();
    let full = mat_mul(&scaled, &qt);
    SymmetricMatrix::from_fn(n, |i, j| 0.5 * (full[i][j] + full[j][i]))
}

/// Symmetric matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_symmetric(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> SymmetricMatrix {
    let eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    symmetric_with_spectrum(&eigs, rng)
}

pub fn uniform_point(bounds: &[(f64, f64)], rng: &mut impl Rng) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut r = rng(7);
        let q = random_orthogonal(5, &mut r);
        for a in 0..5 {
            for b in 0..5 {
                let d: f64 = (0..5).map(|i| q[i][a] * q[i][b]).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prescribed_spectrum_is_recovered() {
        let mut r = rng(1);
        let m = symmetric_with_spectrum(&[3.0, -1.0, 0.5], &mut r);
        let got = m.spectrum().values().to_vec();
        for (a, b) in got.iter().zip([3.0, 0.5, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn seeds_reproduce() {
        let a = random_symmetric(4, -1.0, 1.0, &mut rng(42));
        let b = random_symmetric(4, -1.0, 1.0, &mut rng(42));
        assert_eq!(a, b);
    }
}
