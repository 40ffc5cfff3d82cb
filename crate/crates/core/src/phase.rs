//! Phase bookkeeping: the semi-convexity angle, the rotation margin and the
//! rotation angle that carries a subcritical phase into the negative
//! supercritical range.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{classify_phase, Criticality};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub n: usize,
    /// The phase `Θ`.
    pub phase: f64,
    /// `(π/2 − Θ)/(n − 1)`, the semi-convexity angle.
    pub theta: f64,
    /// `((n − 2)π/2 + Θ)/(2n(n − 1))`
    pub delta: f64,
    /// Rotation angle.
    pub phi: f64,
    /// `sin φ`
    pub s: f64,
    /// `cos φ`
    pub c: f64,
    pub criticality: Criticality,
    /// Whether `Θ ∈ (−(n − 2)π/2, π/2)`.
    pub semiconvex_regime: bool,
}

impl PhaseParams {
    /// Parameters for the semi-convex regime with the canonical rotation
    /// `φ = π/2 − θ − δ`.
    pub fn derive(n: usize, phase: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("dimension must be at least 2"));
        }
        if !in_semiconvex_regime(n, phase) {
            return Err(Error::RegimeViolation { n, phase });
        }
        let theta = semiconvexity_angle(n, phase);
        let delta = rotation_margin(n, phase);
        Self::assemble(n, phase, theta, delta, FRAC_PI_2 - theta - delta)
    }

    /// Parameters with an explicit rotation angle `φ ∈ [0, π/2)`. The phase
    /// may lie outside the semi-convex regime; `semiconvex_regime` records it.
    pub fn with_rotation(n: usize, phase: f64, phi: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("dimension must be at least 2"));
        }
        if !(0.0..FRAC_PI_2).contains(&phi) {
            return Err(Error::RotationOutOfRange(format!(
                "rotation angle {phi} must lie in [0, pi/2)"
            )));
        }
        let theta = semiconvexity_angle(n, phase);
        let delta = rotation_margin(n, phase);
        Self::assemble(n, phase, theta, delta, phi)
    }

    fn assemble(n: usize, phase: f64, theta: f64, delta: f64, phi: f64) -> Result<Self> {
        let criticality = classify_phase(n, phase)?;
        Ok(Self {
            n,
            phase,
            theta,
            delta,
            phi,
            s: phi.sin(),
            c: phi.cos(),
            criticality,
            semiconvex_regime: in_semiconvex_regime(n, phase),
        })
    }

    /// `Θ − nφ`
    pub fn rotated_phase(&self) -> f64 {
        self.phase - self.n as f64 * self.phi
    }

    /// `−(n − 2)π/2 − nδ`, which equals the rotated phase for the canonical
    /// rotation angle.
    pub fn rotated_phase_from_margin(&self) -> f64 {
        -(self.n as f64 - 2.0) * FRAC_PI_2 - self.n as f64 * self.delta
    }

    /// Lower eigen-angle bound after rotation, `θ + φ`.
    pub fn rotated_lower_angle(&self) -> f64 {
        self.theta + self.phi
    }

    /// Semi-convexity constant `tan θ`.
    pub fn semiconvexity_constant(&self) -> f64 {
        self.theta.tan()
    }
}

pub fn semiconvexity_angle(n: usize, phase: f64) -> f64 {
    (FRAC_PI_2 - phase) / (n as f64 - 1.0)
}

pub fn rotation_margin(n: usize, phase: f64) -> f64 {
    let n = n as f64;
    ((n - 2.0) * FRAC_PI_2 + phase) / (2.0 * n * (n - 1.0))
}

pub fn in_semiconvex_regime(n: usize, phase: f64) -> bool {
    let lower = -(n as f64 - 2.0) * FRAC_PI_2;
    phase > lower && phase < FRAC_PI_2
}

/// Free-function form of [`PhaseParams::derive`].
pub fn derive_phase_params(n: usize, phase: f64) -> Result<PhaseParams> {
    PhaseParams::derive(n, phase)
}
