//! The rank-deficient quadratic-over-linear function
//! `Φ(x) = λx₁²/(2(1+x₃)) + λx₂²/(2(1−x₃)) + Σ_{i≥4}(aᵢxᵢ²/2 + xᵢ⁴/12)`,
//! whose phase `F(D²Φ)` has a non-degenerate minimum at the origin, and the
//! parameter choices that turn it into sharpness examples.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{value_fd_hessian, ExampleSpec, ResidualReport, SolutionFamily, VerifyOptions};
use crate::error::{Error, Result};
use crate::gridfn::{AnalyticField, Jet};
use crate::matrix::SymmetricMatrix;
use crate::operator::sl_operator;

/// Largest admissible `|x₃|`.
pub const X3_LIMIT: f64 = 0.5;

/// Tail coefficients used when only `n` is given.
const DEFAULT_TAIL: [f64; 3] = [1.5, -0.7, 2.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SingularPhi {
    pub lambda: f64,
    /// `a₄, …, a_n`
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiSample {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymmetricMatrix,
    /// Eigensolver spectrum, descending.
    pub spectrum: Vec<f64>,
    /// Closed-form spectrum `(h ± g, 0, aᵢ + xᵢ²)`, descending.
    pub closed_spectrum: Vec<f64>,
    pub phase: f64,
}

impl SingularPhi {
    pub fn new(lambda: f64, a: Vec<f64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {lambda} must be positive")));
        }
        if a.iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::invalid("tail coefficients must be finite and nonzero"));
        }
        Ok(Self { lambda, a })
    }

    /// Dimension-`n` instance with tail coefficients cycling through
    /// `1.5, −0.7, 2.0`.
    pub fn with_default_tail(lambda: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("n must be at least 3"));
        }
        Self::new(lambda, (0..n - 3).map(|i| DEFAULT_TAIL[i % 3]).collect())
    }

    pub fn n(&self) -> usize {
        3 + self.a.len()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::invalid(format!("point of length {} for n = {}", x.len(), self.n())));
        }
        if x[2].abs() > X3_LIMIT {
            return Err(Error::outside(x, "|x3| must not exceed 1/2"));
        }
        Ok(())
    }

    /// `F(D²Φ(0)) = 2 arctan λ + Σ arctan aᵢ`
    pub fn phase_at_origin(&self) -> f64 {
        2.0 * self.lambda.atan() + self.a.iter().map(|v| v.atan()).sum::<f64>()
    }

    fn jet_parts(&self, x: &[f64]) -> (f64, Vec<f64>, SymmetricMatrix) {
        let l = self.lambda;
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let a = 1.0 / (1.0 + x3);
        let b = 1.0 / (1.0 - x3);
        let mut value = 0.5 * l * (x1 * x1 * a + x2 * x2 * b);
        let mut grad = vec![
            l * x1 * a,
            l * x2 * b,
            0.5 * l * (x2 * x2 * b * b - x1 * x1 * a * a),
        ];
        let n = self.n();
        let mut h = SymmetricMatrix::zeros(n);
        h.set(0, 0, l * a);
        h.set(0, 2, -l * x1 * a * a);
        h.set(1, 1, l * b);
        h.set(1, 2, l * x2 * b * b);
        h.set(2, 2, l * x1 * x1 * a.powi(3) + l * x2 * x2 * b.powi(3));
        for (k, &ai) in self.a.iter().enumerate() {
            let xi = x[3 + k];
            value += 0.5 * ai * xi * xi + xi.powi(4) / 12.0;
            grad.push(ai * xi + xi.powi(3) / 3.0);
            h.set(3 + k, 3 + k, ai + xi * xi);
        }
        (value, grad, h)
    }

    /// Phase from the closed-form spectrum.
    pub fn phase(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.closed_spectrum_unchecked(x).iter().map(|v| v.atan()).sum())
    }

    fn closed_spectrum_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let l = self.lambda;
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let a = 1.0 / (1.0 + x3);
        let b = 1.0 / (1.0 - x3);
        let h = l * (1.0 / (1.0 - x3 * x3) + 0.5 * a.powi(3) * x1 * x1 + 0.5 * b.powi(3) * x2 * x2);
        let inner = 2.0 * a * b * x3 + (b.powi(3) * x2 * x2 - a.powi(3) * x1 * x1);
        let g = l * (0.25 * inner * inner + a.powi(3) * b.powi(3) * x1 * x1 * x2 * x2).sqrt();
        let mut out = vec![h + g, h - g, 0.0];
        out.extend(self.a.iter().enumerate().map(|(k, &ai)| ai + x[3 + k] * x[3 + k]));
        out.sort_by(|p, q| q.total_cmp(p));
        out
    }
}

pub fn phi_closed_spectrum(spec: &SingularPhi, x: &[f64]) -> Result<Vec<f64>> {
    spec.check(x)?;
    Ok(spec.closed_spectrum_unchecked(x))
}

pub fn phi_eval(spec: &SingularPhi, x: &[f64]) -> Result<PhiSample> {
    spec.check(x)?;
    let (value, gradient, hessian) = spec.jet_parts(x);
    let spectrum = hessian.eigen().values;
    let phase = sl_operator(&hessian);
    Ok(PhiSample {
        value,
        gradient,
        hessian,
        spectrum,
        closed_spectrum: spec.closed_spectrum_unchecked(x),
        phase,
    })
}

impl AnalyticField for SingularPhi {
    fn dim(&self) -> usize {
        self.n()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.check(x)?;
        let (value, gradient, hessian) = self.jet_parts(x);
        Ok(Jet {
            value,
            gradient,
            hessian,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonDegenReport {
    /// Closed-form Hessian of `x ↦ F(D²Φ(x))` at the origin.
    pub closed: SymmetricMatrix,
    pub fd: SymmetricMatrix,
    pub h: f64,
    /// Max entrywise gap between the two.
    pub max_gap: f64,
    pub min_eigenvalue: f64,
}

/// Closed-form Hessian of the phase at the origin, cross-checked against
/// central differences of the phase computed by the eigensolver.
pub fn nondegen_check(spec: &SingularPhi, h: f64) -> Result<NonDegenReport> {
    let l = spec.lambda;
    let l2 = 1.0 + l * l;
    let n = spec.n();
    let mut diag = vec![2.0 * l / l2, 2.0 * l / l2, 4.0 * l / l2 - 4.0 * l.powi(3) / (l2 * l2)];
    diag.extend(spec.a.iter().map(|&ai| 2.0 / (1.0 + ai * ai)));
    let closed = SymmetricMatrix::from_diagonal(&diag);
    let fd = value_fd_hessian(
        |x| {
            spec.check(x)?;
            Ok(sl_operator(&spec.jet_parts(x).2))
        },
        &vec![0.0; n],
        h,
    )?;
    Ok(NonDegenReport {
        max_gap: closed.sub(&fd).max_abs(),
        min_eigenvalue: closed.min_eigenvalue(),
        closed,
        fd,
        h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelComponent {
    pub epsilon: f64,
    pub half_width: f64,
    pub h: f64,
    /// Number of grid nodes in the component.
    pub nodes: usize,
    /// Max distance between two nodes of the component.
    pub diameter: f64,
    pub touches_boundary: bool,
}

/// Flood fill of `{F(D²Φ) < F(D²Φ(0)) + ε²}` from the origin over the grid
/// `[−R, R]ⁿ` with `nodes` points per axis (forced odd so that 0 is a node).
pub fn sublevel_component(
    spec: &SingularPhi,
    eps: f64,
    half_width: f64,
    nodes: usize,
) -> Result<SublevelComponent> {
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if !(half_width > 0.0 && half_width <= X3_LIMIT) {
        return Err(Error::invalid(format!("half width must lie in (0, {X3_LIMIT}]")));
    }
    let n = spec.n();
    let per_axis = nodes.max(5) | 1;
    let mid = per_axis / 2;
    let h = half_width / mid as f64;
    let total = per_axis
        .checked_pow(n as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| Error::invalid("flood-fill grid too large"))?;
    let level = spec.phase_at_origin() + eps * eps;

    let coords = |mut k: usize| -> Vec<usize> {
        let mut idx = vec![0; n];
        for d in (0..n).rev() {
            idx[d] = k % per_axis;
            k /= per_axis;
        }
        idx
    };
    let flat = |idx: &[usize]| idx.iter().fold(0, |acc, &i| acc * per_axis + i);
    let point = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| (i as f64 - mid as f64) * h).collect() };

    let mut state = vec![0u8; total]; // 0 unseen, 1 inside, 2 outside
    let start = flat(&vec![mid; n]);
    state[start] = 1;
    let mut queue = VecDeque::from([start]);
    let mut inside = Vec::new();
    let mut touches = false;
    while let Some(k) = queue.pop_front() {
        inside.push(k);
        let idx = coords(k);
        if idx.iter().any(|&i| i == 0 || i + 1 == per_axis) {
            touches = true;
        }
        for d in 0..n {
            for step in [-1isize, 1] {
                let j = idx[d] as isize + step;
                if j < 0 || j >= per_axis as isize {
                    continue;
                }
                let mut nb = idx.clone();
                nb[d] = j as usize;
                let f = flat(&nb);
                if state[f] != 0 {
                    continue;
                }
                let phase: f64 = spec
                    .closed_spectrum_unchecked(&point(&nb))
                    .iter()
                    .map(|v| v.atan())
                    .sum();
                if phase < level {
                    state[f] = 1;
                    queue.push_back(f);
                } else {
                    state[f] = 2;
                }
            }
        }
    }

    // the diameter is attained on nodes with an outside neighbour
    let rim: Vec<Vec<f64>> = inside
        .iter()
        .filter(|&&k| {
            let idx = coords(k);
            (0..n).any(|d| {
                [-1isize, 1].iter().any(|&s| {
                    let j = idx[d] as isize + s;
                    if j < 0 || j >= per_axis as isize {
                        return true;
                    }
                    let mut nb = idx.clone();
                    nb[d] = j as usize;
                    state[flat(&nb)] != 1
                })
            })
        })
        .map(|&k| point(&coords(k)))
        .collect();
    let diameter = rim
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            rim[i + 1..]
                .iter()
                .map(|q| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt();

    Ok(SublevelComponent {
        epsilon: eps,
        half_width,
        h,
        nodes: inside.len(),
        diameter,
        touches_boundary: touches,
    })
}

/// Nodes per axis of the adaptive flood fill.
pub const SUBLEVEL_NODES: usize = 61;

/// Diameter of the sublevel component on an adaptive box that starts at
/// half-width `4ε` and doubles until the component no longer reaches the
/// boundary. Fails once the box would exceed `|x| ≤ 1/2`.
pub fn sublevel_diameter(spec: &SingularPhi, eps: f64) -> Result<SublevelComponent> {
    let mut r = 4.0 * eps;
    loop {
        let width = r.min(X3_LIMIT);
        let comp = sublevel_component(spec, eps, width, SUBLEVEL_NODES)?;
        if !comp.touches_boundary {
            return Ok(comp);
        }
        if width >= X3_LIMIT {
            return Err(Error::Infeasible(format!(
                "epsilon {eps} too large: the sublevel component reaches |x| = 1/2"
            )));
        }
        r *= 2.0;
    }
}

/// Largest `ε` (to `1e−4` relative) whose component stays inside the fixed
/// box `[−1/2, 1/2]ⁿ`.
pub fn sublevel_epsilon_max(spec: &SingularPhi, nodes: usize) -> Result<f64> {
    let touches = |e: f64| -> Result<bool> {
        Ok(sublevel_component(spec, e, X3_LIMIT, nodes)?.touches_boundary)
    };
    let mut lo = 0.0;
    let mut hi = 0.25;
    while !touches(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 64.0 {
            return Ok(hi);
        }
    }
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if touches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessParameters {
    /// 1 for `Θ ∈ [π/2, (n−2)π/2)`, 2 for the semi-convex regime.
    pub case: u8,
    pub lambda: f64,
    /// Common negative tail coefficient in case 1.
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub delta: Option<f64>,
    /// `a₄, …, a_n`
    pub tail: Vec<f64>,
    /// `c*_ε + (π/2)(2 − n + 2·#{aᵢ < 0})`
    pub predicted_phase: f64,
    /// `predicted_phase − Θ`
    pub residual: f64,
}

/// Chooses `λ`, the tail coefficients and (case 1) `δ` so that the
/// transformed example has phase `Θ`. `delta` defaults to one eighth of
/// `(n−2)π/2 − Θ`, a quarter of its admissible range.
pub fn sharpness_parameters(
    n: usize,
    phase: f64,
    eps: f64,
    delta: Option<f64>,
) -> Result<SharpnessParameters> {
    if n < 3 {
        return Err(Error::invalid("n must be at least 3"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid("epsilon must be nonnegative"));
    }
    let nf = n as f64;
    let upper = (nf - 2.0) * FRAC_PI_2;
    let (case, lambda, a, delta, tail) = if phase > -upper && phase < FRAC_PI_2 {
        let theta = (FRAC_PI_2 - phase) / (nf - 1.0);
        let angle = theta + eps * eps / (nf - 1.0);
        if angle >= FRAC_PI_2 {
            return Err(Error::Infeasible(format!(
                "theta + eps^2/(n-1) = {angle} reaches pi/2"
            )));
        }
        let lambda = 1.0 / angle.tan();
        (2u8, lambda, None, None, vec![lambda; n - 3])
    } else if n >= 4 && phase >= FRAC_PI_2 && phase < upper {
        let max_delta = (upper - phase) / 2.0;
        let delta = delta.unwrap_or(max_delta / 4.0);
        if !(delta > 0.0 && delta < max_delta) {
            return Err(Error::invalid(format!("delta must lie in (0, {max_delta})")));
        }
        let lambda = ((PI - delta) / 2.0).tan();
        let tilde = (phase - upper + delta) / (nf - 3.0);
        let angle = tilde - eps * eps / (nf - 3.0);
        if !(angle > -FRAC_PI_2 && angle < 0.0) {
            return Err(Error::Infeasible(format!(
                "arctan A = {angle} leaves (-pi/2, 0)"
            )));
        }
        let a = angle.tan();
        (1u8, lambda, Some(a), Some(delta), vec![a; n - 3])
    } else {
        return Err(Error::RegimeViolation { n, phase });
    };
    let negatives = tail.iter().filter(|&&v| v < 0.0).count() as f64;
    let c_star = 2.0 * lambda.atan() + tail.iter().map(|v| v.atan()).sum::<f64>() + eps * eps;
    let predicted_phase = c_star + FRAC_PI_2 * (2.0 - nf + 2.0 * negatives);
    Ok(SharpnessParameters {
        case,
        lambda,
        a,
        delta,
        tail,
        predicted_phase,
        residual: predicted_phase - phase,
    })
}

impl SolutionFamily for SingularPhi {
    fn name(&self) -> &'static str {
        "SingularPhi"
    }

    fn spec(&self) -> ExampleSpec {
        ExampleSpec::SingularPhi {
            lambda: self.lambda,
            a: self.a.clone(),
        }
    }

    fn target_phase(&self) -> Option<f64> {
        None
    }

    fn probe_box(&self) -> Vec<(f64, f64)> {
        vec![(-X3_LIMIT, X3_LIMIT); self.n()]
    }

    fn verify(&self, opts: &VerifyOptions) -> Result<Vec<ResidualReport>> {
        let probes = self.probes(opts);
        let samples = probes
            .par_iter()
            .map(|x| phi_eval(self, x))
            .collect::<Result<Vec<_>>>()?;
        let gaps: Vec<f64> = samples
            .iter()
            .map(|s| {
                s.spectrum
                    .iter()
                    .zip(&s.closed_spectrum)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        // the zero eigenvalue is the one of smallest magnitude
        let zeros: Vec<f64> = samples
            .iter()
            .map(|s| s.spectrum.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
            .collect();
        let nd = nondegen_check(self, opts.fd_step)?;
        let strict = if nd.min_eigenvalue > 0.0 { 0.0 } else { 1.0 - nd.min_eigenvalue };
        Ok(vec![
            ResidualReport::new("closed-form spectrum = eigensolver spectrum", &gaps, 1e-9),
            ResidualReport::new("rank D2Phi = n - 1 (zero eigenvalue)", &zeros, 1e-10),
            ResidualReport::new("NonDegen closed form vs finite differences", &[nd.max_gap], 1e-4)
                .with_h(opts.fd_step),
            ResidualReport::new("NonDegen min eigenvalue > 0", &[strict], 0.0)
                .with_value(nd.min_eigenvalue),
        ])
    }
}
