//! Ball chains along curves and the effective-estimate sweep over the
//! rotated Pogorelov examples.
//!
//! Given a curve `γ` and a radius `r`, the chain is `t₀ = 0` and
//! `tᵢ = sup{t : |γ(t) − γ(tᵢ₋₁)| ≤ 2r}`, stopping once the supremum reaches
//! `t = 1`. Balls of radius `r` around the centers are pairwise disjoint and
//! consecutive centers are exactly `2r` apart.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::EmbeddedSemiconvex;
use crate::gridfn::{AnalyticField, GridFunction};
use crate::numfmt::format_significant;
use crate::phase::PhaseParams;

/// Relative slack with which the endpoint counts as reached.
pub const ENDPOINT_SLACK: f64 = 1e-12;
/// Default number of samples of `t ↦ x̄(tx)`.
pub const DEFAULT_SAMPLES: usize = 10_000;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Piecewise-linear curve parametrized by normalized arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    vertices: Vec<Vec<f64>>,
    /// Parameter of each vertex; `0` first, `1` last.
    params: Vec<f64>,
    length: f64,
}

impl Polyline {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::invalid("a polyline needs at least two vertices"));
        }
        let n = vertices[0].len();
        if n == 0 || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::invalid("vertices must share a positive dimension"));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vertices must be finite"));
        }
        let mut cum = Vec::with_capacity(vertices.len());
        cum.push(0.0);
        for w in vertices.windows(2) {
            let d = dist(&w[0], &w[1]);
            if d == 0.0 {
                return Err(Error::invalid("consecutive vertices must be distinct"));
            }
            cum.push(cum.last().unwrap() + d);
        }
        let length = *cum.last().unwrap();
        let mut params: Vec<f64> = cum.iter().map(|c| c / length).collect();
        *params.last_mut().unwrap() = 1.0;
        Ok(Self {
            vertices,
            params,
            length,
        })
    }

    /// Like [`Polyline::new`] but drops repeated consecutive points first.
    pub fn from_samples(points: Vec<Vec<f64>>) -> Result<Self> {
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            if kept.last().map_or(true, |q| q != &p) {
                kept.push(p);
            }
        }
        Self::new(kept)
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `γ(t)` for `t ∈ [0, 1]`.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, 1.0);
        let j = match self.params.partition_point(|&p| p <= t) {
            0 => 0,
            k => (k - 1).min(self.params.len() - 2),
        };
        let (t0, t1) = (self.params[j], self.params[j + 1]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.vertices[j]
            .iter()
            .zip(&self.vertices[j + 1])
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }

    /// `sup_t |γ(t) − γ(0)|`, attained at a vertex.
    pub fn max_excursion(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| dist(v, &self.vertices[0]))
            .fold(0.0, f64::max)
    }

    /// Largest `t ≥ t_from` with `|γ(t) − center| ≤ radius`, scanning
    /// segments from the end of the curve.
    fn last_within(&self, center: &[f64], radius: f64, t_from: f64) -> Option<f64> {
        let r2 = radius * radius;
        for j in (0..self.vertices.len() - 1).rev() {
            let (t0, t1) = (self.params[j], self.params[j + 1]);
            if t1 < t_from {
                break;
            }
            let a = &self.vertices[j];
            let b = &self.vertices[j + 1];
            let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
            let ac: Vec<f64> = a.iter().zip(center).map(|(p, q)| p - q).collect();
            // |ac + s d|² ≤ r²  ⇔  A s² + 2B s + C ≤ 0
            let qa: f64 = d.iter().map(|v| v * v).sum();
            let qb: f64 = ac.iter().zip(&d).map(|(p, q)| p * q).sum();
            let qc: f64 = ac.iter().map(|v| v * v).sum::<f64>() - r2;
            let disc = qb * qb - qa * qc;
            if disc < 0.0 {
                continue;
            }
            let root = disc.sqrt();
            // numerically stable pair of roots
            let (lo, hi) = if qb > 0.0 {
                let q = -(qb + root);
                (q / qa, if q != 0.0 { qc / q } else { 0.0 })
            } else {
                let q = -qb + root;
                (if q != 0.0 { qc / q } else { 0.0 }, q / qa)
            };
            if hi < 0.0 || lo > 1.0 {
                continue;
            }
            let s = hi.min(1.0);
            let t = t0 + s * (t1 - t0);
            if t >= t_from {
                return Some(t);
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallChain {
    pub r: f64,
    /// `t₀ = 0 < t₁ < … < t_k < 1`
    pub t: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
}

/// Outcome of the post-hoc invariant checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainInvariants {
    pub min_separation: f64,
    pub disjoint: bool,
    pub max_tangency_error: f64,
    pub tangent: bool,
    pub endpoint_distance: f64,
    pub endpoint_captured: bool,
    pub count_bound: f64,
    pub within_count_bound: bool,
}

impl ChainInvariants {
    pub fn all_hold(&self) -> bool {
        self.disjoint && self.tangent && self.endpoint_captured && self.within_count_bound
    }
}

impl BallChain {
    /// Index of the last center.
    pub fn k(&self) -> usize {
        self.centers.len() - 1
    }

    pub fn check(&self, curve: &Polyline) -> ChainInvariants {
        let two_r = 2.0 * self.r;
        let min_separation = (0..self.centers.len())
            .flat_map(|i| (i + 1..self.centers.len()).map(move |j| (i, j)))
            .map(|(i, j)| dist(&self.centers[i], &self.centers[j]))
            .fold(f64::INFINITY, f64::min);
        let max_tangency_error = self
            .centers
            .windows(2)
            .map(|w| (dist(&w[0], &w[1]) - two_r).abs())
            .fold(0.0, f64::max);
        let end = curve.at(1.0);
        let endpoint_distance = dist(&end, self.centers.last().unwrap());
        let count_bound = (1.0 + curve.max_excursion() / self.r).powi(curve.dim() as i32) - 1.0;
        ChainInvariants {
            min_separation,
            disjoint: min_separation > two_r - 1e-12,
            max_tangency_error,
            tangent: max_tangency_error <= 1e-10,
            endpoint_distance,
            endpoint_captured: endpoint_distance <= two_r * (1.0 + ENDPOINT_SLACK),
            count_bound,
            within_count_bound: self.k() as f64 <= count_bound,
        }
    }
}

/// The inductive-supremum chain along `curve`.
pub fn ball_chain(curve: &Polyline, r: f64) -> Result<BallChain> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("radius {r} must be positive")));
    }
    let two_r = 2.0 * r;
    let end = curve.at(1.0);
    let mut t = vec![0.0];
    let mut centers = vec![curve.at(0.0)];
    loop {
        let last = centers.last().unwrap();
        if dist(last, &end) <= two_r * (1.0 + ENDPOINT_SLACK) {
            break;
        }
        let t_prev = *t.last().unwrap();
        let next = curve
            .last_within(last, two_r, t_prev)
            .ok_or_else(|| Error::Degenerate("ball chain lost the curve".into()))?;
        if !(next > t_prev) {
            return Err(Error::Degenerate(format!("ball chain stalled at t = {t_prev}")));
        }
        t.push(next);
        centers.push(curve.at(next));
    }
    Ok(BallChain { r, t, centers })
}

/// Samples `t ↦ c·(tx) + s·∇u(tx)` at `samples + 1` equally spaced `t`.
pub fn gradient_image_polyline(
    gradient: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    params: &PhaseParams,
    x: &[f64],
    samples: usize,
) -> Result<Polyline> {
    if samples == 0 {
        return Err(Error::invalid("at least one sample interval is needed"));
    }
    let (s, c) = (params.s, params.c);
    let points = (0..=samples)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / samples as f64;
            let p: Vec<f64> = x.iter().map(|v| t * v).collect();
            let g = gradient(&p)?;
            Ok(p.iter().zip(&g).map(|(a, b)| c * a + s * b).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Polyline::from_samples(points)
}

/// Chain along the image of the segment `[0, x]` under `x ↦ cx + s∇u(x)`,
/// for a gradient given in closed form.
pub fn chain_on_gradient_image_with(
    gradient: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    params: &PhaseParams,
    x: &[f64],
    r: f64,
    samples: usize,
) -> Result<BallChain> {
    let curve = gradient_image_polyline(gradient, params, x, samples)?;
    ball_chain(&curve, r)
}

/// Chain along the image of `[0, x]` for a sampled function. Uses the
/// closed-form gradient when the grid carries one, interpolated finite
/// differences otherwise.
pub fn chain_on_gradient_image(
    u: &GridFunction,
    params: &PhaseParams,
    x: &[f64],
    r: f64,
) -> Result<BallChain> {
    if x.len() != u.dim() {
        return Err(Error::invalid("point dimension does not match grid"));
    }
    if !u.contains(x) || !u.contains(&vec![0.0; x.len()]) {
        return Err(Error::outside(x, "segment [0, x] must lie in the grid box"));
    }
    match u.analytic() {
        Some(field) => chain_on_gradient_image_with(|p| field.gradient(p), params, x, r, DEFAULT_SAMPLES),
        None => chain_on_gradient_image_with(|p| u.gradient_at(p), params, x, r, DEFAULT_SAMPLES),
    }
}

/// Greedy Vitali pass: points of the curve at mutual distance above `2r`,
/// taken in order along the samples.
pub fn vitali_count(curve: &Polyline, r: f64) -> usize {
    let mut picked: Vec<&Vec<f64>> = Vec::new();
    let lim = 4.0 * r * r;
    for v in curve.vertices() {
        if picked.iter().all(|p| dist2(p, v) > lim) {
            picked.push(v);
        }
    }
    picked.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianBound {
    /// `∫ (λ₁)₊` over the central half-box.
    pub integral: f64,
    /// `sup |∇u|` over the grid.
    pub l: f64,
    /// `integral / (1 + L)`
    pub ratio: f64,
}

/// Midpoint-rule integral of the positive part of the top Hessian eigenvalue
/// over the central half of the grid box.
pub fn laplacian_integral_bound(u: &GridFunction) -> Result<LaplacianBound> {
    let bounds = u.bounds();
    let inside = |x: &[f64]| {
        x.iter()
            .zip(&bounds)
            .all(|(v, (lo, hi))| (v - 0.5 * (lo + hi)).abs() <= 0.25 * (hi - lo) * (1.0 + 1e-12))
    };
    let cell = u.cell_volume();
    let integral = match u.analytic() {
        Some(field) => {
            (0..u.cell_count())
                .into_par_iter()
                .map(|k| {
                    let x = u.cell_midpoint(k);
                    if inside(&x) {
                        Ok(field.hessian(&x)?.max_eigenvalue().max(0.0))
                    } else {
                        Ok(0.0)
                    }
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .sum::<f64>()
                * cell
        }
        None => {
            let hf = crate::gridfn::fd_hessian(u)?;
            hf.nodes
                .par_iter()
                .zip(&hf.hessians)
                .filter(|(&k, _)| inside(&u.node(k)))
                .map(|(_, h)| h.max_eigenvalue().max(0.0))
                .sum::<f64>()
                * cell
        }
    };
    let l = crate::gridfn::sup_gradient_norm(u)?;
    Ok(LaplacianBound {
        integral,
        l,
        ratio: integral / (1.0 + l),
    })
}

/// One row of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub lambda1: f64,
    pub chain_k: usize,
    pub volume: f64,
    /// `log λ₁(0) / (1 + L)`
    pub ratio: f64,
    /// Greedy Vitali count along the same curve.
    pub vitali: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Chain radius.
    pub r: f64,
    /// Chain end point `(target, 0, …, 0)`.
    pub target: f64,
    pub samples: usize,
    /// Midpoint cells per unit of `e^M x` in the volume quadrature.
    pub x_cells_per_peak: f64,
    pub y_cells: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            r: 0.02,
            target: 0.9,
            samples: DEFAULT_SAMPLES,
            x_cells_per_peak: 4.0,
            y_cells: 32,
        }
    }
}

pub fn estimate_sweep(ms: &[f64], theta: f64, n: usize) -> Result<Vec<SweepRecord>> {
    estimate_sweep_with(ms, theta, n, &SweepOptions::default())
}

/// For each `M`: the `n`-dimensional semi-convex example `w`, its gradient
/// bound `L`, `λ₁(0) = e^M`, the volume of `x̄(Q)` and the chain length along
/// `x̄([0, x])`.
pub fn estimate_sweep_with(
    ms: &[f64],
    theta: f64,
    n: usize,
    opts: &SweepOptions,
) -> Result<Vec<SweepRecord>> {
    if ms.is_empty() {
        return Err(Error::invalid("the M list is empty"));
    }
    ms.par_iter().map(|&m| sweep_one(m, theta, n, opts)).collect()
}

fn sweep_one(m: f64, theta: f64, n: usize, opts: &SweepOptions) -> Result<SweepRecord> {
    let w = EmbeddedSemiconvex::new(m, theta, n)?;
    let params = PhaseParams::derive(n, w.phase())?;
    let base = w.embedding.base;
    let (rx, ry) = (base.rx, base.ry);
    let tan = theta.tan();

    // midpoint grid over the source square Q; image quantities are pulled
    // back through T, whose Jacobian is c_θ + s_θ u_yy
    let nx = ((2.0 * rx * m.exp() * opts.x_cells_per_peak).ceil() as usize).max(16);
    let ny = opts.y_cells.max(4);
    let (hx, hy) = (2.0 * rx / nx as f64, 2.0 * ry / ny as f64);
    let (s, c) = (params.s, params.c);
    let grad_sq = |p: &crate::families::PartialSample| p.gradient[0].powi(2) + p.gradient[1].powi(2);
    let (inner_sq, planar) = (0..nx)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let x = -rx + (i as f64 + 0.5) * hx;
            let mut g: f64 = 0.0;
            let mut vol = 0.0;
            for k in 0..ny {
                let y = -ry + (k as f64 + 0.5) * hy;
                let p = base.at_source(x, y)?;
                let h = &p.hessian;
                let det = (c + s * h.get(0, 0)) * (c + s * h.get(1, 1)) - (s * h.get(0, 1)).powi(2);
                vol += det * p.jacobian;
                g = g.max(grad_sq(&p));
            }
            Ok((g, vol))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0_f64, 0.0), |(g, v), (gi, vi)| (g.max(gi), v + vi));
    // |∇ū ∘ T| peaks on the boundary of Q
    let mut edge_sq: f64 = 0.0;
    for &(x, y) in &[(rx, ry), (-rx, ry), (rx, -ry), (-rx, -ry), (rx, 0.0), (0.0, ry)] {
        edge_sq = edge_sq.max(grad_sq(&base.at_source(x, y)?));
    }
    let l = (inner_sq.max(edge_sq) + (n - 2) as f64 * tan * tan).sqrt();
    let tail = (2.0 * (c - s * tan)).powi(n as i32 - 2);
    let volume = planar * hx * hy * tail;

    let mut x = vec![0.0; n];
    x[0] = opts.target;
    let curve = gradient_image_polyline(|p| w.gradient(p), &params, &x, opts.samples)?;
    let chain = ball_chain(&curve, opts.r)?;
    Ok(SweepRecord {
        m,
        l,
        lambda1: m.exp(),
        chain_k: chain.k(),
        volume,
        ratio: m / (1.0 + l),
        vitali: vitali_count(&curve, opts.r),
    })
}

pub const CSV_HEADER: &str = "M,L,lambda1,chain_k,volume,ratio";

/// Writes the sweep table with ten significant digits.
pub fn write_csv(records: &[SweepRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let f = |v: f64| format_significant(v, 10);
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f(r.m),
            f(r.l),
            f(r.lambda1),
            r.chain_k,
            f(r.volume),
            f(r.ratio)
        )?;
    }
    Ok(())
}

/// Least-squares line through `(x, y)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max |y − fit(x)| / |y|`
    pub max_relative_residual: f64,
}

pub fn affine_fit(x: &[f64], y: &[f64]) -> Result<AffineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("affine fit needs at least two paired values"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("affine fit over a single abscissa".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_relative_residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (slope * a + intercept)).abs() / b.abs())
        .fold(0.0, f64::max);
    Ok(AffineFit {
        slope,
        intercept,
        max_relative_residual,
    })
}

/// Aggregate checks over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub max_ratio: f64,
    pub ratio_increasing: bool,
    pub chain_fit: AffineFit,
    pub volume_fit: AffineFit,
}

pub fn summarize_sweep(records: &[SweepRecord]) -> Result<SweepSummary> {
    let l: Vec<f64> = records.iter().map(|r| r.l).collect();
    let k: Vec<f64> = records.iter().map(|r| r.chain_k as f64).collect();
    let v: Vec<f64> = records.iter().map(|r| r.volume).collect();
    Ok(SweepSummary {
        max_ratio: records.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max),
        ratio_increasing: records.windows(2).all(|w| w[1].ratio > w[0].ratio),
        chain_fit: affine_fit(&l, &k)?,
        volume_fit: affine_fit(&l, &v)?,
    })
}
