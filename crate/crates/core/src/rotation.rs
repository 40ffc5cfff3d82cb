//! Rotation of gradient graphs by an angle `φ`.
//!
//! At the matrix level the rotation acts on eigen-angles by
//! `arctan λ̄ = arctan λ − φ`. On sampled functions the rotated potential is
//! recovered through the conjugate of `su + c|x|²/2`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::{fd_hessian, semiconvexity_certify, GridFunction};
use crate::matrix::{mat_mul, solve_dense, SymmetricMatrix};
use crate::operator::{sl_operator, Spectrum};
use crate::phase::PhaseParams;

/// Slack on the rotation preconditions.
pub const PRECONDITION_SLACK: f64 = 1e-12;

/// A rotated Hessian together with the smallest pivot `c + sλ` met along the
/// way; a pivot near zero means the output has an eigenvalue near infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedHessian {
    pub matrix: SymmetricMatrix,
    pub min_pivot: f64,
}

impl RotatedHessian {
    /// Reciprocal of the smallest pivot.
    pub fn condition(&self) -> f64 {
        1.0 / self.min_pivot
    }
}

/// `(−sI + cM)(cI + sM)⁻¹` through the spectral decomposition of `M`.
pub fn hessian_rotate(m: &SymmetricMatrix, phi: f64) -> Result<SymmetricMatrix> {
    Ok(hessian_rotate_report(m, phi)?.matrix)
}

pub fn hessian_rotate_report(m: &SymmetricMatrix, phi: f64) -> Result<RotatedHessian> {
    if !phi.is_finite() || phi.abs() >= std::f64::consts::PI {
        return Err(Error::RotationOutOfRange(format!("angle {phi}")));
    }
    if phi == 0.0 {
        return Ok(RotatedHessian {
            matrix: m.clone(),
            min_pivot: 1.0,
        });
    }
    let (s, c) = phi.sin_cos();
    let eig = m.eigen();
    let min_pivot = eig
        .values
        .iter()
        .map(|&l| c + s * l)
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 0.0) {
        return Err(Error::RotationOutOfRange(format!(
            "cI + sM is not positive definite (smallest pivot {min_pivot}) for phi = {phi}"
        )));
    }
    Ok(RotatedHessian {
        matrix: eig.reassemble(|l| (c * l - s) / (c + s * l)),
        min_pivot,
    })
}

/// `(sI + cM̄)(cI − sM̄)⁻¹`, the inverse of [`hessian_rotate`].
pub fn hessian_unrotate(m_bar: &SymmetricMatrix, phi: f64) -> Result<SymmetricMatrix> {
    hessian_rotate(m_bar, -phi)
}

pub fn hessian_unrotate_report(m_bar: &SymmetricMatrix, phi: f64) -> Result<RotatedHessian> {
    hessian_rotate_report(m_bar, -phi)
}

/// Dense-solve evaluation of `(−sI + cM)(cI + sM)⁻¹`, independent of the
/// eigensolver. Intended as a cross-check.
pub fn hessian_rotate_direct(m: &SymmetricMatrix, phi: f64) -> Result<SymmetricMatrix> {
    let n = m.dim();
    let (s, c) = phi.sin_cos();
    let rows = m.to_rows();
    let denom: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| s * rows[i][j] + if i == j { c } else { 0.0 }).collect())
        .collect();
    let numer: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| c * rows[i][j] - if i == j { s } else { 0.0 }).collect())
        .collect();
    // columns of denom⁻¹
    let mut inv_cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        inv_cols.push(solve_dense(&denom, &e)?);
    }
    let inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| inv_cols[j][i]).collect()).collect();
    let prod = mat_mul(&numer, &inv);
    Ok(SymmetricMatrix::from_fn(n, |i, j| 0.5 * (prod[i][j] + prod[j][i])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotatedGraph {
    pub params: PhaseParams,
    /// Source sample points.
    pub x: Vec<Vec<f64>>,
    pub x_bar: Vec<Vec<f64>>,
    pub y_bar: Vec<Vec<f64>>,
    pub u_bar: Vec<f64>,
    /// Max deviation between least-squares slopes of `ū` and `ȳ`.
    pub gradient_residual: f64,
    /// Queries whose discrete supremum was not attained at their own source node.
    pub argmax_mismatches: usize,
    pub h: Vec<f64>,
    /// Rotated Hessians at the samples, present when `u` has closed forms.
    #[serde(skip)]
    pub hessian_bar: Option<Vec<SymmetricMatrix>>,
}

impl RotatedGraph {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Smallest and largest eigenvalue of `D²ū` over the samples.
    pub fn hessian_range(&self) -> Option<(f64, f64)> {
        self.hessian_bar.as_ref().map(|hs| {
            hs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                let e = m.eigen().values;
                (lo.min(e[e.len() - 1]), hi.max(e[0]))
            })
        })
    }
}

fn gradients(u: &GridFunction, nodes: &[usize]) -> Result<Vec<Vec<f64>>> {
    match u.analytic() {
        Some(field) => nodes.par_iter().map(|&k| field.gradient(&u.node(k))).collect(),
        None => nodes
            .par_iter()
            .map(|&k| {
                Ok((0..u.dim())
                    .map(|a| {
                        let st = u.stride(a);
                        (u.value(k + st) - u.value(k - st)) / (2.0 * u.axes()[a].spacing())
                    })
                    .collect())
            })
            .collect(),
    }
}

/// Rotates the sampled graph of `u`, which must be `K`-semi-convex with
/// `K < cot φ`. Samples are the interior nodes.
pub fn rotate_function(u: &GridFunction, params: &PhaseParams, k: f64) -> Result<RotatedGraph> {
    if params.n != u.dim() {
        return Err(Error::invalid(format!(
            "params are for n = {} but the grid has dimension {}",
            params.n,
            u.dim()
        )));
    }
    let nodes = u.interior_nodes();
    let x: Vec<Vec<f64>> = nodes.iter().map(|&j| u.node(j)).collect();
    let grads = gradients(u, &nodes)?;
    let hessians = match u.analytic() {
        Some(field) => Some(
            x.par_iter()
                .map(|p| hessian_rotate(&field.hessian(p)?, params.phi))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    if params.s == 0.0 {
        return Ok(RotatedGraph {
            params: *params,
            x_bar: x.clone(),
            y_bar: grads,
            u_bar: nodes.iter().map(|&j| u.value(j)).collect(),
            x,
            gradient_residual: 0.0,
            argmax_mismatches: 0,
            h: u.spacing(),
            hessian_bar: hessians,
        });
    }

    let (s, c) = (params.s, params.c);
    let scale = u.values().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let semi = semiconvexity_certify(u, k)?;
    if semi.margin < -1e-9 * scale {
        return Err(Error::inapplicable(format!(
            "input is not {k}-semi-convex (margin {})",
            semi.margin
        )));
    }
    if k >= c / s {
        return Err(Error::inapplicable(format!(
            "semi-convexity constant {k} is not below cot(phi) = {}",
            c / s
        )));
    }

    let x_bar: Vec<Vec<f64>> = x
        .iter()
        .zip(&grads)
        .map(|(p, g)| p.iter().zip(g).map(|(a, b)| c * a + s * b).collect())
        .collect();
    let y_bar: Vec<Vec<f64>> = x
        .iter()
        .zip(&grads)
        .map(|(p, g)| p.iter().zip(g).map(|(a, b)| -s * a + c * b).collect())
        .collect();

    // ū(x̄) = c/(2s)|x̄|² − (1/s) G*(x̄) with G = su + c|x|²/2 over all nodes
    let all: Vec<Vec<f64>> = (0..u.len()).into_par_iter().map(|j| u.node(j)).collect();
    let big_g: Vec<f64> = all
        .par_iter()
        .enumerate()
        .map(|(j, p)| s * u.value(j) + 0.5 * c * p.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let conj: Vec<(f64, usize)> = x_bar
        .par_iter()
        .map(|q| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (j, p) in all.iter().enumerate() {
                let v = q.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - big_g[j];
                if v > best {
                    best = v;
                    arg = j;
                }
            }
            (best, arg)
        })
        .collect();
    let u_bar: Vec<f64> = x_bar
        .iter()
        .zip(&conj)
        .map(|(q, (gstar, _))| {
            c / (2.0 * s) * q.iter().map(|v| v * v).sum::<f64>() - gstar / s
        })
        .collect();
    let argmax_mismatches = conj
        .iter()
        .zip(&nodes)
        .filter(|((_, arg), &j)| *arg != j)
        .count();

    let gradient_residual = scattered_gradient_residual(u, &nodes, &x_bar, &y_bar, &u_bar)?;

    Ok(RotatedGraph {
        params: *params,
        x,
        x_bar,
        y_bar,
        u_bar,
        gradient_residual,
        argmax_mismatches,
        h: u.spacing(),
        hessian_bar: hessians,
    })
}

/// Weighted least-squares slopes over the `2d + 1` nearest rotated samples,
/// compared with `ȳ`. Only samples whose full index neighbourhood is interior
/// are tested.
fn scattered_gradient_residual(
    u: &GridFunction,
    nodes: &[usize],
    x_bar: &[Vec<f64>],
    y_bar: &[Vec<f64>],
    u_bar: &[f64],
) -> Result<f64> {
    let d = u.dim();
    let k_nearest = 2 * d + 1;
    let position: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, &j)| (j, i)).collect();
    let offsets: Vec<Vec<isize>> = (0..5usize.pow(d as u32))
        .map(|mut f| {
            (0..d)
                .map(|_| {
                    let o = (f % 5) as isize - 2;
                    f /= 5;
                    o
                })
                .collect()
        })
        .filter(|o: &Vec<isize>| o.iter().any(|&v| v != 0))
        .collect();

    let residuals = nodes
        .par_iter()
        .enumerate()
        .filter(|(_, &j)| u.is_interior(&u.multi_index(j), 3))
        .map(|(i, &j)| {
            let idx = u.multi_index(j);
            let mut cands: Vec<(f64, usize)> = offsets
                .iter()
                .filter_map(|o| {
                    let nb: Vec<usize> = idx
                        .iter()
                        .zip(o)
                        .map(|(&a, &b)| (a as isize + b) as usize)
                        .collect();
                    let p = *position.get(&u.flat_index(&nb))?;
                    let d2: f64 = x_bar[p].iter().zip(&x_bar[i]).map(|(a, b)| (a - b).powi(2)).sum();
                    Some((d2, p))
                })
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            cands.truncate(k_nearest);

            let mut normal = vec![vec![0.0; d]; d];
            let mut rhs = vec![0.0; d];
            for &(d2, p) in &cands {
                let w = 1.0 / d2;
                let dx: Vec<f64> = x_bar[p].iter().zip(&x_bar[i]).map(|(a, b)| a - b).collect();
                let du = u_bar[p] - u_bar[i];
                for r in 0..d {
                    rhs[r] += w * dx[r] * du;
                    for col in 0..d {
                        normal[r][col] += w * dx[r] * dx[col];
                    }
                }
            }
            let slope = solve_dense(&normal, &rhs)?;
            Ok(slope
                .iter()
                .zip(&y_bar[i])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step1Report {
    /// `F(P̄) − (Θ − nφ)`
    pub margin: f64,
    pub target: f64,
}

impl Step1Report {
    pub fn holds(&self, tol: f64) -> bool {
        self.margin >= -tol
    }
}

/// Lower bound on `F(P̄)` for a rotated test matrix: with `arctan λ₁ ≥ π/2 − φ`
/// and `P̄ ≥ −tan(θ + φ)`, `F(P̄) ≥ Θ − nφ`.
pub fn subsolution_step1_check(p_bar: &SymmetricMatrix, params: &PhaseParams) -> Result<Step1Report> {
    subsolution_step1_spectrum(&p_bar.spectrum(), params, params.theta)
}

/// Same check on a spectrum, with the lower-bound angle `θ'` in place of
/// `θ`; `θ' > θ` weakens the hypothesis and may yield a negative margin.
pub fn subsolution_step1_spectrum(
    spectrum: &Spectrum,
    params: &PhaseParams,
    lower_theta: f64,
) -> Result<Step1Report> {
    if spectrum.dim() != params.n {
        return Err(Error::invalid("spectrum dimension does not match params"));
    }
    let top = spectrum.largest().atan();
    if top < FRAC_PI_2 - params.phi - PRECONDITION_SLACK {
        return Err(Error::inapplicable(format!(
            "arctan of largest eigenvalue {top} is below pi/2 - phi"
        )));
    }
    let lower_angle = lower_theta + params.phi;
    if spectrum.smallest().atan() < -lower_angle - PRECONDITION_SLACK {
        return Err(Error::inapplicable(format!(
            "smallest eigenvalue {} is below -tan({lower_angle})",
            spectrum.smallest()
        )));
    }
    let target = params.rotated_phase();
    Ok(Step1Report {
        margin: spectrum.phase() - target,
        target,
    })
}

/// `∫ det(cI + sD²u)` over the grid box by midpoint quadrature.
pub fn gradient_image_volume(u: &GridFunction, params: &PhaseParams) -> Result<f64> {
    gradient_image_volume_where(u, params, |_| true)
}

/// Volume of the image of the region accepted by `region`. Closed-form
/// Hessians are evaluated at cell midpoints; otherwise finite-difference
/// Hessians at interior nodes each carry one cell of volume.
pub fn gradient_image_volume_where(
    u: &GridFunction,
    params: &PhaseParams,
    region: impl Fn(&[f64]) -> bool + Sync,
) -> Result<f64> {
    let (s, c) = (params.s, params.c);
    let jac = |h: &SymmetricMatrix| -> f64 {
        h.eigen().values.iter().map(|&l| c + s * l).product()
    };
    let cell = u.cell_volume();
    match u.analytic() {
        Some(field) => {
            let sum = (0..u.cell_count())
                .into_par_iter()
                .map(|k| {
                    let x = u.cell_midpoint(k);
                    if region(&x) {
                        Ok(jac(&field.hessian(&x)?))
                    } else {
                        Ok(0.0)
                    }
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .sum::<f64>();
            Ok(sum * cell)
        }
        None => {
            let hf = fd_hessian(u)?;
            let sum: f64 = hf
                .nodes
                .par_iter()
                .zip(&hf.hessians)
                .filter(|(&k, _)| region(&u.node(k)))
                .map(|(_, h)| jac(h))
                .sum();
            Ok(sum * cell)
        }
    }
}

/// `F` of the rotated Hessian minus `F(M) − nφ`.
pub fn phase_shift_residual(m: &SymmetricMatrix, phi: f64) -> Result<f64> {
    let rotated = hessian_rotate(m, phi)?;
    Ok(sl_operator(&rotated) - sl_operator(m) + m.dim() as f64 * phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rotates_to_minus_tan() {
        let r = hessian_rotate(&SymmetricMatrix::zeros(3), 0.4).unwrap();
        assert!(r.sub(&SymmetricMatrix::scalar(3, -(0.4f64).tan())).max_abs() < 1e-15);
        let back = hessian_unrotate(&r, 0.4).unwrap();
        assert!(back.max_abs() < 1e-15);
    }

    #[test]
    fn scalar_angle_subtraction() {
        let a = 1.1_f64;
        let r = hessian_rotate(&SymmetricMatrix::scalar(2, a.tan()), 0.3).unwrap();
        assert!((r.get(0, 0) - (a - 0.3).tan()).abs() < 1e-13);
        assert!(r.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn precondition_enforced() {
        let phi = 0.5_f64;
        let m = SymmetricMatrix::scalar(2, -1.0 / phi.tan() - 0.1);
        assert!(matches!(hessian_rotate(&m, phi), Err(Error::RotationOutOfRange(_))));
        let near = SymmetricMatrix::scalar(2, 1.0 / phi.tan() - 1e-9);
        let rep = hessian_unrotate_report(&near, phi).unwrap();
        assert!(rep.condition() > 1e8);
    }

    #[test]
    fn direct_matches_spectral() {
        let m = SymmetricMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, -0.3]]).unwrap();
        let a = hessian_rotate(&m, 0.7).unwrap();
        let b = hessian_rotate_direct(&m, 0.7).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-13);
    }

    #[test]
    fn step1_equality_chain() {
        let p = PhaseParams::derive(3, 0.0).unwrap();
        let spec = Spectrum::new(vec![
            (FRAC_PI_2 - p.phi).tan(),
            -(p.theta + p.phi).tan(),
            -(p.theta + p.phi).tan(),
        ])
        .unwrap();
        let r = subsolution_step1_spectrum(&spec, &p, p.theta).unwrap();
        assert!(r.margin.abs() < 1e-12);
    }
}
