//! Rotation of `u_M` in the `y` variable only.
//!
//! `T(x, y) = (x, cy + s·u_y)` and `∇ū(T(x, y)) = (u_x, −sy + c·u_y)`. The
//! rotated potential solves `F(D²ū) = π/2 − θ`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::pogorelov::{pogorelov_eval, PogorelovJet, Y_LIMIT};
use super::{gradient_fd_hessian, require_m, ExampleSpec, ResidualReport, SolutionFamily, VerifyOptions};
use crate::error::{Error, Result};
use crate::gridfn::{AnalyticField, Jet};
use crate::matrix::SymmetricMatrix;
use crate::operator::sl_operator;

/// Smallest admissible `det DT` on the working square.
pub const MIN_JACOBIAN: f64 = 0.01;
const SHRINK: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialRotated {
    pub m: f64,
    pub theta: f64,
    pub s: f64,
    pub c: f64,
    /// Half-width of the source square in `x`.
    pub rx: f64,
    /// Half-width of the source square in `y`.
    pub ry: f64,
    /// `T` maps the source square onto a set containing
    /// `[−rx, rx] × [−y_reach, y_reach]`.
    pub y_reach: f64,
}

/// One evaluation of the rotated potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSample {
    /// Source point `(x, y)`.
    pub source: [f64; 2],
    /// Image point `T(x, y)`.
    pub image: [f64; 2],
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: SymmetricMatrix,
    /// `det DT = c + s·u_yy`
    pub jacobian: f64,
}

impl PartialSample {
    /// `c(1 − det D²ū) − sΔū`
    pub fn determinant_residual(&self, s: f64, c: f64) -> f64 {
        let h = &self.hessian;
        let det = h.get(0, 0) * h.get(1, 1) - h.get(0, 1).powi(2);
        c * (1.0 - det) - s * (h.get(0, 0) + h.get(1, 1))
    }
}

impl PartialRotated {
    pub fn new(m: f64, theta: f64) -> Result<Self> {
        require_m(m)?;
        if !(theta.abs() < FRAC_PI_2) {
            return Err(Error::invalid(format!("theta {theta} must lie in (-pi/2, pi/2)")));
        }
        let (s, c) = theta.sin_cos();
        let (mut rx, mut ry) = (1.0, Y_LIMIT);
        if s < 0.0 {
            // shrink the square until det DT stays above MIN_JACOBIAN
            let mut r = Y_LIMIT;
            loop {
                let worst = min_jacobian_on_square(m, s, c, r)?;
                if worst >= MIN_JACOBIAN {
                    break;
                }
                r *= SHRINK;
                if r < 1e-3 {
                    return Err(Error::Degenerate("det DT does not stay positive on any square".into()));
                }
            }
            rx = r;
            ry = r;
        }
        let edge = |x: f64| -> Result<f64> { Ok(c * ry + s * pogorelov_eval(m, x, ry)?.uy) };
        // q is monotone in |x|, so the extremes sit at x = 0 or x = ±rx
        let y_reach = edge(0.0)?.min(edge(rx)?);
        if !(y_reach > 0.0) {
            return Err(Error::Degenerate("image of the square has empty y-range".into()));
        }
        Ok(Self {
            m,
            theta,
            s,
            c,
            rx,
            ry,
            y_reach,
        })
    }

    /// Solves `cy + s·u_y(x, y) = Y` for `y` by bracketed Newton.
    pub fn preimage_y(&self, x: f64, big_y: f64) -> Result<f64> {
        if self.s == 0.0 {
            return Ok(big_y / self.c);
        }
        let f = |y: f64| -> Result<(f64, f64)> {
            let j = pogorelov_eval(self.m, x, y)?;
            Ok((self.c * y + self.s * j.uy - big_y, self.c + self.s * j.uyy))
        };
        let (mut lo, mut hi) = (-self.ry, self.ry);
        let (flo, _) = f(lo)?;
        let (fhi, _) = f(hi)?;
        let slack = 1e-13 * (1.0 + big_y.abs());
        if flo > slack || fhi < -slack {
            return Err(Error::outside(&[x, big_y], "not in the image of the working square"));
        }
        if flo >= 0.0 {
            return Ok(lo);
        }
        if fhi <= 0.0 {
            return Ok(hi);
        }
        let mut y = (big_y / self.c).clamp(lo, hi);
        for _ in 0..100 {
            let (v, dv) = f(y)?;
            if v == 0.0 {
                return Ok(y);
            }
            if v < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let newton = y - v / dv;
            let next = if dv > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - y).abs() <= 1e-16 * (1.0 + y.abs()) || hi - lo <= 1e-16 {
                return Ok(next);
            }
            y = next;
        }
        Ok(y)
    }

    /// Evaluates at a source point `(x, y)`.
    pub fn at_source(&self, x: f64, y: f64) -> Result<PartialSample> {
        let j = pogorelov_eval(self.m, x, y)?;
        Ok(self.assemble(x, y, &j))
    }

    /// Evaluates at an image point `(X, Y)`.
    pub fn at_image(&self, big_x: f64, big_y: f64) -> Result<PartialSample> {
        if big_x.abs() > self.rx {
            return Err(Error::outside(&[big_x, big_y], "x outside the working square"));
        }
        let y = self.preimage_y(big_x, big_y)?;
        self.at_source(big_x, y)
    }

    fn assemble(&self, x: f64, y: f64, j: &PogorelovJet) -> PartialSample {
        let (s, c) = (self.s, self.c);
        let d = c + s * j.uyy;
        // D²ū · DT = D(∇ū ∘ T), DT = [[1, 0], [s·u_xy, d]]
        let rows = [[j.uxx, j.uxy], [c * j.uxy, c * j.uyy - s]];
        let solve = |r: [f64; 2]| -> [f64; 2] {
            let b = r[1] / d;
            [r[0] - b * s * j.uxy, b]
        };
        let r0 = solve(rows[0]);
        let r1 = solve(rows[1]);
        let hessian = SymmetricMatrix::from_fn(2, |a, b| match (a, b) {
            (0, 0) => r0[0],
            (1, 1) => r1[1],
            _ => 0.5 * (r0[1] + r1[0]),
        });
        PartialSample {
            source: [x, y],
            image: [x, c * y + s * j.uy],
            value: j.u + 0.5 * s * (c * j.uy * j.uy - 2.0 * s * y * j.uy - c * y * y),
            gradient: [j.ux, -s * y + c * j.uy],
            hessian,
            jacobian: d,
        }
    }
}

fn min_jacobian_on_square(m: f64, s: f64, c: f64, r: f64) -> Result<f64> {
    const N: usize = 101;
    let mut worst = f64::INFINITY;
    for i in 0..N {
        for k in 0..N {
            let x = (-r + 2.0 * r * i as f64 / (N - 1) as f64).clamp(-r, r);
            let y = (-r + 2.0 * r * k as f64 / (N - 1) as f64).clamp(-r, r);
            let j = pogorelov_eval(m, x, y)?;
            worst = worst.min(c + s * j.uyy);
        }
    }
    Ok(worst)
}

/// Rotated potential, gradient and Hessian at image points `(X, Y)`.
pub fn partial_rotate_2d(spec: &PartialRotated, queries: &[Vec<f64>]) -> Result<Vec<PartialSample>> {
    queries
        .par_iter()
        .map(|q| {
            if q.len() != 2 {
                return Err(Error::invalid("queries must be planar points"));
            }
            spec.at_image(q[0], q[1])
        })
        .collect()
}

impl AnalyticField for PartialRotated {
    fn dim(&self) -> usize {
        2
    }

    fn jet(&self, p: &[f64]) -> Result<Jet> {
        let s = self.at_image(p[0], p[1])?;
        Ok(Jet {
            value: s.value,
            gradient: s.gradient.to_vec(),
            hessian: s.hessian,
        })
    }
}

impl SolutionFamily for PartialRotated {
    fn name(&self) -> &'static str {
        "PartialRotated"
    }

    fn spec(&self) -> ExampleSpec {
        ExampleSpec::PartialRotated {
            m: self.m,
            theta: self.theta,
        }
    }

    fn target_phase(&self) -> Option<f64> {
        Some(FRAC_PI_2 - self.theta)
    }

    fn probe_box(&self) -> Vec<(f64, f64)> {
        vec![
            (-0.9 * self.rx, 0.9 * self.rx),
            (-0.9 * self.y_reach, 0.9 * self.y_reach),
        ]
    }

    fn verify(&self, opts: &VerifyOptions) -> Result<Vec<ResidualReport>> {
        let probes = self.probes(opts);
        let samples = partial_rotate_2d(self, &probes)?;
        let det_form: Vec<f64> = samples
            .iter()
            .map(|p| p.determinant_residual(self.s, self.c))
            .collect();
        let target = FRAC_PI_2 - self.theta;
        let f_form: Vec<f64> = samples
            .iter()
            .map(|p| sl_operator(&p.hessian) - target)
            .collect();
        let image: Vec<f64> = samples
            .iter()
            .zip(&probes)
            .map(|(p, q)| (p.image[1] - q[1]).abs().max((p.image[0] - q[0]).abs()))
            .collect();
        let steps = [opts.fd_step * (-self.m).exp(), opts.fd_step];
        let fd: Vec<f64> = probes
            .iter()
            .zip(&samples)
            .map(|(q, p)| {
                let h = gradient_fd_hessian(self, q, &steps)?;
                Ok(h.sub(&p.hessian).max_abs() / p.hessian.max_abs().max(1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        let origin = self.at_image(0.0, 0.0)?;
        Ok(vec![
            ResidualReport::new("c(1 - det D2ubar) = s Laplacian(ubar)", &det_form, 1e-7),
            ResidualReport::new("F(D2ubar) = pi/2 - theta", &f_form, 1e-7),
            ResidualReport::new("T(preimage) = query", &image, 1e-12),
            ResidualReport::new("D2ubar vs finite differences (relative)", &fd, 1e-4)
                .with_h(opts.fd_step),
            ResidualReport::new(
                "ubar_11(T(0,0)) = e^M (relative)",
                &[origin.hessian.get(0, 0) / self.m.exp() - 1.0],
                1e-10,
            ),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_angle_is_identity() {
        let p = PartialRotated::new(2.0, 0.0).unwrap();
        let a = p.at_image(0.3, -0.4).unwrap();
        let j = pogorelov_eval(2.0, 0.3, -0.4).unwrap();
        assert_eq!(a.value, j.u);
        assert!(a.hessian.sub(&j.hessian()).max_abs() < 1e-15);
    }

    #[test]
    fn negative_angle_shrinks_square() {
        let p = PartialRotated::new(3.0, -std::f64::consts::FRAC_PI_6).unwrap();
        assert!(p.rx < 0.9 && p.rx > 0.5, "r = {}", p.rx);
        assert!(min_jacobian_on_square(3.0, p.s, p.c, p.rx).unwrap() >= MIN_JACOBIAN);
    }

    #[test]
    fn image_covers_cos_band() {
        for m in [1.0, 4.0, 8.0] {
            let p = PartialRotated::new(m, 0.5).unwrap();
            assert!(p.y_reach >= 0.99 * p.c, "{} {}", p.y_reach, p.c);
            assert!(p.at_image(0.999, p.y_reach).is_ok());
            assert!(p.at_image(-1.0, -p.y_reach).is_ok());
        }
    }

    #[test]
    fn preimage_round_trip() {
        let p = PartialRotated::new(3.0, 1.0).unwrap();
        let s = p.at_source(0.4, 0.7).unwrap();
        let back = p.preimage_y(s.image[0], s.image[1]).unwrap();
        assert!((back - 0.7).abs() < 1e-12);
    }
}
