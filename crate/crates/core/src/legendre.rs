//! Discrete Legendre–Fenchel conjugation over sample nodes.
//!
//! `f*(x̄) = max_k (x̄·x_k − f(x_k))` is evaluated by a direct scan, so the
//! supremum property holds exactly at every node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::{semiconvexity_certify, GridFunction};
use crate::matrix::SymmetricMatrix;

/// Slack used when certifying convexity of sampled data.
const CONVEXITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateResult {
    pub queries: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Flat index of the node attaining the supremum for each query.
    pub argmax: Vec<usize>,
}

impl ConjugateResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scans `points` for `max (q·p − v)`; ties resolve to the lowest index.
fn scan(points: &[Vec<f64>], values: &[f64], q: &[f64]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, (p, v)) in points.iter().zip(values).enumerate() {
        let cand = dot(q, p) - v;
        if cand > best {
            best = cand;
            arg = k;
        }
    }
    (best, arg)
}

fn all_nodes(f: &GridFunction) -> Vec<Vec<f64>> {
    (0..f.len()).into_par_iter().map(|k| f.node(k)).collect()
}

fn conjugate_on(points: &[Vec<f64>], values: &[f64], queries: &[Vec<f64>]) -> ConjugateResult {
    let (vals, args): (Vec<f64>, Vec<usize>) = queries
        .par_iter()
        .map(|q| scan(points, values, q))
        .unzip();
    ConjugateResult {
        queries: queries.to_vec(),
        values: vals,
        argmax: args,
    }
}

pub fn conjugate(f: &GridFunction, queries: &[Vec<f64>]) -> Result<ConjugateResult> {
    if let Some(q) = queries.iter().find(|q| q.len() != f.dim()) {
        return Err(Error::invalid(format!(
            "query of length {} for a {}-dimensional grid",
            q.len(),
            f.dim()
        )));
    }
    if queries.is_empty() {
        return Ok(ConjugateResult {
            queries: Vec::new(),
            values: Vec::new(),
            argmax: Vec::new(),
        });
    }
    Ok(conjugate_on(&all_nodes(f), f.values(), queries))
}

/// Exact gradient images of the interior nodes, the default query set.
pub fn gradient_image_queries(f: &GridFunction) -> Result<Vec<Vec<f64>>> {
    let field = f
        .analytic()
        .ok_or_else(|| Error::invalid("gradient-image queries need closed-form gradients"))?;
    f.interior_nodes()
        .par_iter()
        .map(|&k| field.gradient(&f.node(k)))
        .collect()
}

fn require_convex(f: &GridFunction, k: f64, what: &str) -> Result<()> {
    let scale = f.values().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let report = semiconvexity_certify(f, k)?;
    if report.margin < -CONVEXITY_SLACK * scale {
        return Err(Error::inapplicable(format!(
            "{what}: certificate margin {} at {:?}",
            report.margin, report.worst_point
        )));
    }
    Ok(())
}

/// `‖f** − f‖∞` over interior nodes.
///
/// The first pass conjugates onto a uniform slope grid spanning the range of
/// forward-difference slopes of the samples, with as many slopes per axis as
/// the input has nodes. The second pass conjugates back onto the nodes.
pub fn involution_check(f: &GridFunction) -> Result<f64> {
    require_convex(f, 0.0, "involution check needs convex input")?;
    let d = f.dim();
    let mut slope_axes: Vec<Vec<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        let stride = f.stride(a);
        let h = f.axes()[a].spacing();
        let (lo, hi) = (0..f.len())
            .filter(|&k| f.multi_index(k)[a] + 1 < f.axes()[a].count)
            .map(|k| (f.value(k + stride) - f.value(k)) / h)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), s| (l.min(s), u.max(s)));
        let count = f.axes()[a].count;
        if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
            slope_axes.push(vec![0.5 * (lo + hi)]);
        } else {
            slope_axes.push(
                (0..count)
                    .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                    .collect(),
            );
        }
    }
    let total: usize = slope_axes.iter().map(Vec::len).product();
    let slopes: Vec<Vec<f64>> = (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; d];
            for a in (0..d).rev() {
                let n = slope_axes[a].len();
                p[a] = slope_axes[a][flat % n];
                flat /= n;
            }
            p
        })
        .collect();

    let nodes = all_nodes(f);
    let star = conjugate_on(&nodes, f.values(), &slopes);
    let interior = f.interior_nodes();
    let queries: Vec<Vec<f64>> = interior.iter().map(|&k| nodes[k].clone()).collect();
    let back = conjugate_on(&slopes, &star.values, &queries);
    Ok(interior
        .iter()
        .zip(&back.values)
        .map(|(&k, v)| (v - f.value(k)).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub gradient: Vec<f64>,
    /// Finite-difference Hessian of the discrete conjugate at `∇g(x₀)`.
    pub conjugate_hessian: SymmetricMatrix,
    pub inverse_hessian: SymmetricMatrix,
    /// `‖D²g*(x̄₀) − D²g(x₀)⁻¹‖∞` (max entry).
    pub discrepancy: f64,
}

/// Default step of the conjugate patch stencil.
pub const DUALITY_PATCH_STEP: f64 = 0.05;

/// Compares the Hessian of the discrete conjugate at `x̄₀ = ∇g(x₀)` with the
/// inverse Hessian of `g` at `x₀`.
pub fn hessian_duality_check(g: &GridFunction, x0: &[f64]) -> Result<DualityReport> {
    hessian_duality_check_with_step(g, x0, DUALITY_PATCH_STEP)
}

pub fn hessian_duality_check_with_step(
    g: &GridFunction,
    x0: &[f64],
    eta: f64,
) -> Result<DualityReport> {
    if !g.contains(x0) {
        return Err(Error::outside(x0, "x0 outside the grid box"));
    }
    let field = g
        .analytic()
        .ok_or_else(|| Error::invalid("duality check needs closed-form derivatives"))?;
    let hess = field.hessian(x0)?;
    let lmin = hess.min_eigenvalue();
    if lmin < 0.1 {
        return Err(Error::Degenerate(format!(
            "smallest Hessian eigenvalue {lmin} at x0 is below 0.1"
        )));
    }
    let inverse = hess.inverse()?;
    let grad = field.gradient(x0)?;
    let d = g.dim();

    // 3^d patch around x̄₀
    let offsets: Vec<Vec<i32>> = (0..3usize.pow(d as u32))
        .map(|mut k| {
            (0..d)
                .map(|_| {
                    let o = (k % 3) as i32 - 1;
                    k /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let queries: Vec<Vec<f64>> = offsets
        .iter()
        .map(|o| grad.iter().zip(o).map(|(x, &s)| x + eta * s as f64).collect())
        .collect();
    let conj = conjugate(g, &queries)?;
    for (q, &arg) in queries.iter().zip(&conj.argmax) {
        if !g.is_interior(&g.multi_index(arg), 1) {
            return Err(Error::inapplicable(format!(
                "patch point {q:?} is not interior to the sampled gradient image"
            )));
        }
    }
    let at = |o: &[i32]| -> f64 {
        let k = offsets.iter().position(|x| x.as_slice() == o).expect("stencil offset");
        conj.values[k]
    };
    let unit = |i: usize, s: i32| -> Vec<i32> {
        (0..d).map(|k| if k == i { s } else { 0 }).collect()
    };
    let centre = vec![0; d];
    let conjugate_hessian = SymmetricMatrix::from_fn(d, |i, j| {
        if i == j {
            (at(&unit(i, 1)) - 2.0 * at(&centre) + at(&unit(i, -1))) / (eta * eta)
        } else {
            let o = |si: i32, sj: i32| -> Vec<i32> {
                (0..d)
                    .map(|k| if k == i { si } else if k == j { sj } else { 0 })
                    .collect()
            };
            (at(&o(1, 1)) - at(&o(1, -1)) - at(&o(-1, 1)) + at(&o(-1, -1))) / (4.0 * eta * eta)
        }
    });
    let discrepancy = conjugate_hessian.sub(&inverse).max_abs();
    Ok(DualityReport {
        gradient: grad,
        conjugate_hessian,
        inverse_hessian: inverse,
        discrepancy,
    })
}

/// `min |∇g(x₁) − ∇g(x₂)|² / (L |x₁ − x₂|²)` over the pairs. Requires
/// `D²g ≥ √L·I` on the grid.
pub fn distance_increasing_check(
    g: &GridFunction,
    l: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::invalid("L must be positive"));
    }
    require_convex(g, -l.sqrt(), "gradient map is not certified L-expanding")?;
    let ratios = pairs
        .par_iter()
        .map(|(a, b)| {
            let dx2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            if dx2 == 0.0 {
                return Err(Error::invalid(format!("coincident pair at {a:?}")));
            }
            let ga = g.gradient_at(a)?;
            let gb = g.gradient_at(b)?;
            let dy2: f64 = ga.iter().zip(&gb).map(|(x, y)| (x - y).powi(2)).sum();
            Ok(dy2 / (l * dx2))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(f64::INFINITY, f64::min))
}
