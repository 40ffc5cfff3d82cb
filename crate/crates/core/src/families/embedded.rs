//! Higher-dimensional solutions built from the planar rotated potential by
//! adding a quadratic in the remaining variables.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::partial::PartialRotated;
use super::{ExampleSpec, ResidualReport, SolutionFamily, VerifyOptions};
use crate::error::{Error, Result};
use crate::gridfn::{AnalyticField, Jet};
use crate::matrix::SymmetricMatrix;
use crate::operator::{semiconvex_eig_bounds, sl_operator};
use crate::phase::PhaseParams;

/// `w(x) = ū(x₁, x₂) + (tail/2) Σ_{i>2} xᵢ²`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embedding {
    pub base: PartialRotated,
    pub n: usize,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSample {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymmetricMatrix,
    pub phase: f64,
}

pub fn embed(e: &Embedding, x: &[f64]) -> Result<EmbedSample> {
    if x.len() != e.n {
        return Err(Error::invalid(format!("point of length {} for n = {}", x.len(), e.n)));
    }
    let p = e.base.at_image(x[0], x[1])?;
    let tail_sq: f64 = x[2..].iter().map(|v| v * v).sum();
    let mut gradient = vec![p.gradient[0], p.gradient[1]];
    gradient.extend(x[2..].iter().map(|v| e.tail * v));
    let hessian = SymmetricMatrix::from_fn(e.n, |i, j| match (i, j) {
        (0..=1, 0..=1) => p.hessian.get(i, j),
        _ if i == j => e.tail,
        _ => 0.0,
    });
    let phase = sl_operator(&p.hessian) + (e.n - 2) as f64 * e.tail.atan();
    Ok(EmbedSample {
        value: p.value + 0.5 * e.tail * tail_sq,
        gradient,
        hessian,
        phase,
    })
}

impl Embedding {
    fn probe_box(&self) -> Vec<(f64, f64)> {
        let mut b = self.base.probe_box();
        b.extend(std::iter::repeat((-1.0, 1.0)).take(self.n - 2));
        b
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        let s = embed(self, x)?;
        Ok(Jet {
            value: s.value,
            gradient: s.gradient,
            hessian: s.hessian,
        })
    }
}

fn phase_report(samples: &[EmbedSample], target: f64) -> ResidualReport {
    let r: Vec<f64> = samples.iter().map(|s| s.phase - target).collect();
    ResidualReport::new("F(D2w) = Theta", &r, 1e-7)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedSemiconvex {
    pub m: f64,
    pub theta: f64,
    pub embedding: Embedding,
}

impl EmbeddedSemiconvex {
    pub fn new(m: f64, theta: f64, n: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < FRAC_PI_2) {
            return Err(Error::invalid(format!("theta {theta} must lie in (0, pi/2)")));
        }
        if n < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        Ok(Self {
            m,
            theta,
            embedding: Embedding {
                base: PartialRotated::new(m, theta)?,
                n,
                tail: -theta.tan(),
            },
        })
    }

    /// `π/2 − (n − 1)θ`
    pub fn phase(&self) -> f64 {
        FRAC_PI_2 - (self.embedding.n - 1) as f64 * self.theta
    }
}

impl AnalyticField for EmbeddedSemiconvex {
    fn dim(&self) -> usize {
        self.embedding.n
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.embedding.jet(x)
    }
}

impl SolutionFamily for EmbeddedSemiconvex {
    fn name(&self) -> &'static str {
        "EmbeddedSemiconvex"
    }

    fn spec(&self) -> ExampleSpec {
        ExampleSpec::EmbeddedSemiconvex {
            m: self.m,
            theta: self.theta,
            n: self.embedding.n,
        }
    }

    fn target_phase(&self) -> Option<f64> {
        Some(self.phase())
    }

    fn probe_box(&self) -> Vec<(f64, f64)> {
        self.embedding.probe_box()
    }

    fn verify(&self, opts: &VerifyOptions) -> Result<Vec<ResidualReport>> {
        let probes = self.probes(opts);
        let samples = probes
            .par_iter()
            .map(|x| embed(&self.embedding, x))
            .collect::<Result<Vec<_>>>()?;
        let tan = self.theta.tan();
        // the tail eigenvalues equal −tan θ exactly, so strictness is
        // checked on the planar block and the full Hessian is checked
        // non-strictly
        let planar: Vec<f64> = samples
            .iter()
            .map(|s| {
                let h = &s.hessian;
                let block = SymmetricMatrix::from_fn(2, |i, j| h.get(i, j));
                block.min_eigenvalue() + tan
            })
            .collect();
        let worst = planar.iter().copied().fold(f64::INFINITY, f64::min);
        let strict: Vec<f64> = planar
            .iter()
            .map(|&m| if m > 0.0 { 0.0 } else { 1.0 - m })
            .collect();
        let full: Vec<f64> = samples
            .iter()
            .map(|s| (-(s.hessian.min_eigenvalue() + tan)).max(0.0))
            .collect();
        // the phase always lies in the semi-convex regime for theta in (0, pi/2)
        let params = PhaseParams::derive(self.embedding.n, self.phase())?;
        let failures: Vec<f64> = samples
            .iter()
            .map(|s| match semiconvex_eig_bounds(&s.hessian.spectrum(), &params, 1e-7) {
                Ok(r) if r.holds() => 0.0,
                _ => 1.0,
            })
            .collect();
        Ok(vec![
            phase_report(&samples, self.phase()),
            ResidualReport::new("lambda_min(D2ubar) + tan(theta) > 0", &strict, 0.0).with_value(worst),
            ResidualReport::new("lambda_min(D2w) + tan(theta) >= 0", &full, 1e-12),
            ResidualReport::new(
                "-tan(theta) <= lambda_i < 1 for i >= 2 (failures)",
                &failures,
                0.0,
            ),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedConvex {
    pub m: f64,
    pub theta: f64,
    pub a: f64,
    pub embedding: Embedding,
}

impl EmbeddedConvex {
    pub fn new(m: f64, theta: f64, a: f64, n: usize) -> Result<Self> {
        if !(theta > -FRAC_PI_2 && theta <= 0.0) {
            return Err(Error::invalid(format!("theta {theta} must lie in (-pi/2, 0]")));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("A = {a} must be nonnegative")));
        }
        if n < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        Ok(Self {
            m,
            theta,
            a,
            embedding: Embedding {
                base: PartialRotated::new(m, theta)?,
                n,
                tail: a,
            },
        })
    }

    /// `π/2 − θ + (n − 2) arctan A`
    pub fn phase(&self) -> f64 {
        FRAC_PI_2 - self.theta + (self.embedding.n - 2) as f64 * self.a.atan()
    }
}

impl AnalyticField for EmbeddedConvex {
    fn dim(&self) -> usize {
        self.embedding.n
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.embedding.jet(x)
    }
}

impl SolutionFamily for EmbeddedConvex {
    fn name(&self) -> &'static str {
        "EmbeddedConvex"
    }

    fn spec(&self) -> ExampleSpec {
        ExampleSpec::EmbeddedConvex {
            m: self.m,
            theta: self.theta,
            a: self.a,
            n: self.embedding.n,
        }
    }

    fn target_phase(&self) -> Option<f64> {
        Some(self.phase())
    }

    fn probe_box(&self) -> Vec<(f64, f64)> {
        self.embedding.probe_box()
    }

    fn verify(&self, opts: &VerifyOptions) -> Result<Vec<ResidualReport>> {
        let probes = self.probes(opts);
        let samples = probes
            .par_iter()
            .map(|x| embed(&self.embedding, x))
            .collect::<Result<Vec<_>>>()?;
        let mins: Vec<f64> = samples.iter().map(|s| s.hessian.min_eigenvalue()).collect();
        let worst = mins.iter().copied().fold(f64::INFINITY, f64::min);
        let convex: Vec<f64> = mins.iter().map(|&m| (-m).max(0.0)).collect();
        Ok(vec![
            phase_report(&samples, self.phase()),
            ResidualReport::new("D2w >= 0", &convex, 1e-12).with_value(worst),
        ])
    }
}
