use std::f64::consts::FRAC_PI_2;

use super::{gradient_fd_hessian, require_m, ExampleSpec, ResidualReport, SolutionFamily, VerifyOptions};
use crate::error::{Error, Result};
use crate::gridfn::{AnalyticField, Jet};
use crate::matrix::SymmetricMatrix;
use crate::operator::sl_operator;

/// `(g, g′, g″)` for `g(s) = s·asinh(s) − √(1 + s²)`, the Legendre transform
/// of `cosh`.
pub fn g_eval(s: f64) -> (f64, f64, f64) {
    let q = s.hypot(1.0);
    (s * s.asinh() - q, s.asinh(), 1.0 / q)
}

/// Value and partials of `u_M` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PogorelovJet {
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
    pub uxx: f64,
    pub uxy: f64,
    pub uyy: f64,
}

impl PogorelovJet {
    pub fn det(&self) -> f64 {
        self.uxx * self.uyy - self.uxy * self.uxy
    }

    pub fn hessian(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => self.uxx,
            (1, 1) => self.uyy,
            _ => self.uxy,
        })
    }
}

/// Largest `|y|` accepted by the evaluator.
pub const Y_LIMIT: f64 = 0.999;

/// `u(x, y) = e^{−M} cos(y) g(e^M x / cos y)` with exact chain-rule partials.
pub fn pogorelov_eval(m: f64, x: f64, y: f64) -> Result<PogorelovJet> {
    if !(x.abs() <= 1.0 && y.abs() <= Y_LIMIT) {
        return Err(Error::outside(&[x, y], "outside [-1,1] x [-0.999,0.999]"));
    }
    let em = m.exp();
    let inv = (-m).exp();
    let (sy, cy) = y.sin_cos();
    let ty = sy / cy;
    let t = em * x / cy;
    let (g, g1, _) = g_eval(t);
    let q = t.hypot(1.0);
    Ok(PogorelovJet {
        u: inv * cy * g,
        ux: g1,
        uy: inv * sy * q,
        uxx: em / (q * cy),
        uxy: t * ty / q,
        uyy: inv * q * cy + inv * t * t * sy * ty / q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PogorelovSL {
    pub m: f64,
}

impl PogorelovSL {
    pub fn new(m: f64) -> Result<Self> {
        require_m(m)?;
        Ok(Self { m })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<PogorelovJet> {
        pogorelov_eval(self.m, x, y)
    }
}

impl AnalyticField for PogorelovSL {
    fn dim(&self) -> usize {
        2
    }

    fn jet(&self, p: &[f64]) -> Result<Jet> {
        let j = self.eval(p[0], p[1])?;
        Ok(Jet {
            value: j.u,
            gradient: vec![j.ux, j.uy],
            hessian: j.hessian(),
        })
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        let j = self.eval(p[0], p[1])?;
        Ok(vec![j.ux, j.uy])
    }
}

impl SolutionFamily for PogorelovSL {
    fn name(&self) -> &'static str {
        "PogorelovSL"
    }

    fn spec(&self) -> ExampleSpec {
        ExampleSpec::PogorelovSL { m: self.m }
    }

    fn target_phase(&self) -> Option<f64> {
        Some(FRAC_PI_2)
    }

    fn probe_box(&self) -> Vec<(f64, f64)> {
        vec![(-0.9, 0.9), (-0.9, 0.9)]
    }

    fn verify(&self, opts: &VerifyOptions) -> Result<Vec<ResidualReport>> {
        let probes = self.probes(opts);
        let jets = probes
            .iter()
            .map(|p| self.eval(p[0], p[1]))
            .collect::<Result<Vec<_>>>()?;
        let det: Vec<f64> = jets.iter().map(|j| j.det() - 1.0).collect();
        let phase: Vec<f64> = jets
            .iter()
            .map(|j| sl_operator(&j.hessian()) - FRAC_PI_2)
            .collect();
        // |u_y| against the displayed closed form
        let uy: Vec<f64> = probes
            .iter()
            .zip(&jets)
            .map(|(p, j)| {
                let c = p[1].cos();
                let disp = p[1].sin().abs() * ((-2.0 * self.m).exp() + p[0] * p[0] / (c * c)).sqrt();
                j.uy.abs() - disp
            })
            .collect();
        // x-steps scale with the e^{−M} width of the u_xx peak
        let steps = [opts.fd_step * (-self.m).exp(), opts.fd_step];
        let fd: Vec<f64> = probes
            .iter()
            .map(|p| {
                let h = gradient_fd_hessian(self, p, &steps)?;
                Ok(h.get(0, 0) * h.get(1, 1) - h.get(0, 1).powi(2) - 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        let origin = self.eval(0.0, 0.0)?;
        Ok(vec![
            ResidualReport::new("det D2u = 1", &det, 1e-9),
            ResidualReport::new("F(D2u) = pi/2", &phase, 1e-9),
            ResidualReport::new("|u_y| closed form", &uy, 1e-12),
            ResidualReport::new("det D2u = 1 (finite differences)", &fd, 1e-4).with_h(opts.fd_step),
            ResidualReport::new(
                "u_xx(0,0) = e^M (relative)",
                &[origin.uxx / self.m.exp() - 1.0],
                1e-15,
            ),
        ])
    }
}
