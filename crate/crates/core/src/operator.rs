//! The special Lagrangian operator `F(M) = Σ arctan λᵢ(M)` and the pointwise
//! eigenvalue identities that accompany it.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::phase::PhaseParams;

/// Default tolerance for every check operation.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Eigenvalues beyond this magnitude count as infinite.
pub const SINGULAR_EIGENVALUE: f64 = 1e15;

/// `arctan λ`, with `|λ| > 1e15` mapped to exactly `±π/2`.
#[inline]
pub fn eigen_angle(lambda: f64) -> f64 {
    if lambda > SINGULAR_EIGENVALUE {
        FRAC_PI_2
    } else if lambda < -SINGULAR_EIGENVALUE {
        -FRAC_PI_2
    } else {
        lambda.atan()
    }
}

/// Eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("spectrum must be non-empty"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("spectrum contains NaN"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self(values))
    }

    /// Spectrum from eigen-angles in `[−π/2, π/2]`.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        Self::new(angles.iter().map(|a| a.tan()).collect())
    }

    pub(crate) fn from_sorted_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn largest(&self) -> f64 {
        self.0[0]
    }

    pub fn smallest(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn angles(&self) -> Vec<f64> {
        self.0.iter().map(|&v| eigen_angle(v)).collect()
    }

    /// `Σ arctan λᵢ`
    pub fn phase(&self) -> f64 {
        self.0.iter().map(|&v| eigen_angle(v)).sum()
    }
}

/// `F(M) = Σ arctan λᵢ(M)`.
pub fn sl_operator(m: &SymmetricMatrix) -> f64 {
    m.spectrum().phase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Criticality::Subcritical => "subcritical",
            Criticality::Critical => "critical",
            Criticality::Supercritical => "supercritical",
        };
        f.write_str(s)
    }
}

/// Compares `|Θ|` against the critical value `(n − 2)π/2`.
pub fn classify_phase(n: usize, phase: f64) -> Result<Criticality> {
    let n_f = n as f64;
    if n == 0 || !phase.is_finite() || phase.abs() >= n_f * FRAC_PI_2 {
        return Err(Error::PhaseOutOfRange { n, phase });
    }
    let critical = (n_f - 2.0) * FRAC_PI_2;
    let gap = phase.abs() - critical;
    Ok(if gap.abs() <= 1e-12 {
        Criticality::Critical
    } else if gap > 0.0 {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    })
}

/// `(π/2 − arctan λ₁) − Σ_{i≥2}(arctan λᵢ + θ)`, which equals `Θ − F(λ)`.
pub fn alt_form_residual(spectrum: &Spectrum, params: &PhaseParams) -> f64 {
    let angles = spectrum.angles();
    let head = FRAC_PI_2 - angles[0];
    let tail: f64 = angles[1..].iter().map(|a| a + params.theta).sum();
    head - tail
}

fn check_dim(spectrum: &Spectrum, params: &PhaseParams) -> Result<()> {
    if spectrum.dim() != params.n {
        return Err(Error::invalid(format!(
            "spectrum has {} entries but n = {}",
            spectrum.dim(),
            params.n
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenBoundReport {
    /// `1 − λ₂`; positive means every non-top eigenvalue is below one.
    pub upper_margin: f64,
    /// `λ_n + tan θ`
    pub lower_margin: f64,
}

impl EigenBoundReport {
    pub fn holds(&self) -> bool {
        self.upper_margin > 0.0
    }
}

/// Checks `−tan θ ≤ λᵢ < 1` for `i ≥ 2` on a spectrum that solves the
/// equation and obeys the semi-convex lower bound.
pub fn semiconvex_eig_bounds(
    spectrum: &Spectrum,
    params: &PhaseParams,
    tol: f64,
) -> Result<EigenBoundReport> {
    check_dim(spectrum, params)?;
    let residual = spectrum.phase() - params.phase;
    if residual.abs() > tol {
        return Err(Error::inapplicable(format!(
            "spectrum does not solve the equation: F − Θ = {residual:e}"
        )));
    }
    let tan_theta = params.theta.tan();
    if spectrum.smallest() < -tan_theta - tol {
        return Err(Error::inapplicable(format!(
            "smallest eigenvalue {} below −tan θ = {}",
            spectrum.smallest(),
            -tan_theta
        )));
    }
    let second = spectrum.values().get(1).copied().unwrap_or(f64::NEG_INFINITY);
    Ok(EigenBoundReport {
        upper_margin: 1.0 - second,
        lower_margin: spectrum.smallest() + tan_theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    /// `max_{i≥2} |arctan λᵢ + θ + φ|`
    pub max_deviation: f64,
    /// Deviation bound implied by the input tolerance, `n · tol`.
    pub allowed: f64,
}

impl RigidityReport {
    pub fn saturated(&self) -> bool {
        self.max_deviation <= self.allowed
    }
}

/// At a maximal top angle `arctan λ₁ = π/2 − φ` of a rotated solution, every
/// other eigen-angle must sit on the lower bound `−(θ + φ)`.
pub fn rigidity_check(spectrum: &Spectrum, params: &PhaseParams, tol: f64) -> Result<RigidityReport> {
    check_dim(spectrum, params)?;
    let angles = spectrum.angles();
    let top_gap = angles[0] - (FRAC_PI_2 - params.phi);
    if top_gap.abs() > tol {
        return Err(Error::inapplicable(format!(
            "top eigen-angle is not maximal: gap {top_gap:e}"
        )));
    }
    let eq_gap = spectrum.phase() - params.rotated_phase();
    if eq_gap.abs() > tol {
        return Err(Error::inapplicable(format!(
            "spectrum does not solve the rotated equation: gap {eq_gap:e}"
        )));
    }
    let floor = -params.rotated_lower_angle().tan();
    if spectrum.smallest() < floor - tol {
        return Err(Error::inapplicable(format!(
            "smallest eigenvalue {} below −tan(θ + φ) = {floor}",
            spectrum.smallest()
        )));
    }
    let lower = params.rotated_lower_angle();
    let max_deviation = angles[1..]
        .iter()
        .map(|a| (a + lower).abs())
        .fold(0.0_f64, f64::max);
    Ok(RigidityReport {
        max_deviation,
        allowed: params.n as f64 * tol,
    })
}

/// `Σ_{i>1}[arctan λ̄ᵢ + (θ + φ)] − (cot⁻¹ λ̄₁ − φ)`; vanishes exactly when
/// `F(λ̄) = Θ − nφ`.
pub fn trace_identity_residual(spectrum: &Spectrum, params: &PhaseParams) -> f64 {
    let angles = spectrum.angles();
    let lower = params.rotated_lower_angle();
    let lhs: f64 = angles[1..].iter().map(|a| a + lower).sum();
    let arccot = FRAC_PI_2 - angles[0];
    lhs - (arccot - params.phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn operator_on_simple_matrices() {
        for n in 1..6 {
            assert_eq!(sl_operator(&SymmetricMatrix::zeros(n)), 0.0);
        }
        assert!((sl_operator(&SymmetricMatrix::identity(2)) - FRAC_PI_2).abs() < 1e-15);
        for t in [0.01, 0.5, 3.0, 1e4] {
            let m = SymmetricMatrix::from_diagonal(&[t, 1.0 / t]);
            assert!((sl_operator(&m) - FRAC_PI_2).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_eigenvalues_saturate() {
        assert_eq!(eigen_angle(2e15), FRAC_PI_2);
        assert_eq!(eigen_angle(-2e15), -FRAC_PI_2);
        assert_eq!(eigen_angle(1e15), 1e15_f64.atan());
    }

    #[test]
    fn classification() {
        assert_eq!(classify_phase(3, FRAC_PI_2).unwrap(), Criticality::Critical);
        assert_eq!(classify_phase(4, 3.0 * FRAC_PI_2).unwrap(), Criticality::Supercritical);
        assert_eq!(classify_phase(5, FRAC_PI_2).unwrap(), Criticality::Subcritical);
        assert_eq!(classify_phase(3, -FRAC_PI_2).unwrap(), Criticality::Critical);
        assert_eq!(classify_phase(2, 0.0).unwrap(), Criticality::Critical);
        assert!(classify_phase(3, 1.5 * PI).is_err());
        assert!(classify_phase(3, f64::NAN).is_err());
    }

    #[test]
    fn alt_form_on_solutions() {
        let p = PhaseParams::derive(3, 0.0).unwrap();
        let s = Spectrum::new(vec![1.0, -1.0, 0.0]).unwrap();
        assert!(alt_form_residual(&s, &p).abs() < 1e-15);

        let p2 = PhaseParams::derive(2, PI / 4.0).unwrap();
        let s2 = Spectrum::new(vec![(PI / 4.0).tan(), 0.0]).unwrap();
        assert!(alt_form_residual(&s2, &p2).abs() < 1e-15);
    }

    #[test]
    fn alt_form_measures_phase_defect() {
        let p = PhaseParams::derive(4, -0.7).unwrap();
        let s = Spectrum::new(vec![2.0, 0.3, -0.1, -0.4]).unwrap();
        let f: f64 = [2.0_f64, 0.3, -0.1, -0.4].iter().map(|v| v.atan()).sum();
        assert!((alt_form_residual(&s, &p) - (-0.7 - f)).abs() < 1e-14);
    }

    #[test]
    fn eig_bounds_on_simple_solution() {
        let p = PhaseParams::derive(3, 0.0).unwrap();
        let s = Spectrum::new(vec![1.0, -1.0, 0.0]).unwrap();
        let r = semiconvex_eig_bounds(&s, &p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.upper_margin, 1.0);
        assert!(r.holds());
        assert!(r.lower_margin.abs() < 1e-15);
    }

    #[test]
    fn eig_bounds_saturated_case() {
        let n = 4;
        let p = PhaseParams::derive(n, -0.5).unwrap();
        let mut values = vec![-p.theta.tan(); n];
        values[0] = 1e16;
        let s = Spectrum::new(values).unwrap();
        let r = semiconvex_eig_bounds(&s, &p, DEFAULT_TOLERANCE).unwrap();
        assert!(r.lower_margin.abs() < 1e-15);
        assert!((r.upper_margin - (1.0 + p.theta.tan())).abs() < 1e-15);
    }

    #[test]
    fn eig_bounds_reject_non_solutions() {
        let p = PhaseParams::derive(3, 0.0).unwrap();
        let s = Spectrum::new(vec![1.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            semiconvex_eig_bounds(&s, &p, DEFAULT_TOLERANCE),
            Err(Error::Inapplicable(_))
        ));
        let too_low = Spectrum::new(vec![1e16, 0.5, -10.0]).unwrap();
        assert!(semiconvex_eig_bounds(&too_low, &p, DEFAULT_TOLERANCE).is_err());
    }

    #[test]
    fn rigidity_equality_case() {
        let p = PhaseParams::with_rotation(3, 0.0, PI / 8.0).unwrap();
        let low = (-3.0 * PI / 8.0).tan();
        let s = Spectrum::new(vec![(3.0 * PI / 8.0).tan(), low, low]).unwrap();
        let r = rigidity_check(&s, &p, DEFAULT_TOLERANCE).unwrap();
        assert!(r.saturated());
        assert!(r.max_deviation < 1e-15);
    }

    #[test]
    fn rigidity_requires_maximal_top_angle() {
        let p = PhaseParams::with_rotation(3, 0.0, PI / 8.0).unwrap();
        let low = (-3.0 * PI / 8.0).tan();
        let top = (3.0 * PI / 8.0 - 1e-6).tan();
        let s = Spectrum::new(vec![top, low, low]).unwrap();
        assert!(matches!(
            rigidity_check(&s, &p, DEFAULT_TOLERANCE),
            Err(Error::Inapplicable(_))
        ));
    }

    #[test]
    fn spectrum_sorting_and_validation() {
        let s = Spectrum::new(vec![0.0, 2.0, -1.0]).unwrap();
        assert_eq!(s.values(), &[2.0, 0.0, -1.0]);
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![f64::NAN]).is_err());
    }
}
