use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use rand::Rng;
use slag_core::families::PogorelovSL;
use slag_core::gridfn::{AnalyticField, GridFunction, Jet, QuadraticField};
use slag_core::legendre::{conjugate, distance_increasing_check, hessian_duality_check, involution_check};
use slag_core::sampling::{rng, symmetric_with_spectrum};
use slag_core::{Error, Result, SymmetricMatrix};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `½|x|² + x₁⁴/12`
struct Quartic;

impl AnalyticField for Quartic {
    fn dim(&self) -> usize {
        2
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        Ok(Jet {
            value: 0.5 * (x[0] * x[0] + x[1] * x[1]) + x[0].powi(4) / 12.0,
            gradient: vec![x[0] + x[0].powi(3) / 3.0, x[1]],
            hessian: SymmetricMatrix::from_diagonal(&[1.0 + x[0] * x[0], 1.0]),
        })
    }
}

/// `s·u_M + c|x|²/2`
struct RotatedPogorelov {
    u: PogorelovSL,
    c: f64,
    s: f64,
}

impl AnalyticField for RotatedPogorelov {
    fn dim(&self) -> usize {
        2
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        let j = self.u.jet(x)?;
        Ok(Jet {
            value: self.s * j.value + 0.5 * self.c * dot(x, x),
            gradient: j.gradient.iter().zip(x).map(|(g, xi)| self.s * g + self.c * xi).collect(),
            hessian: j.hessian.scale(self.s).shift(self.c),
        })
    }
}

#[test]
fn conjugate_of_scaled_square() {
    let n = 201;
    let h = 2.0 / (n - 1) as f64;
    for a in [0.5, 1.0, 3.0] {
        let f = GridFunction::sample(&[(-1.0, 1.0)], &[n], |x| 0.5 * a * x[0] * x[0]).unwrap();
        let queries: Vec<Vec<f64>> = (0..=40).map(|i| vec![a * (-1.0 + i as f64 / 20.0)]).collect();
        let r = conjugate(&f, &queries).unwrap();
        for (q, v) in queries.iter().zip(&r.values) {
            let exact = q[0] * q[0] / (2.0 * a);
            let lip = q[0].abs() + a;
            assert!(*v <= exact + 1e-15);
            assert!(exact - v <= lip * h, "a={a} q={q:?}");
        }
    }
    let f = GridFunction::sample(&[(-2.0, 2.0)], &[81], |x| 0.5 * x[0] * x[0]).unwrap();
    assert_eq!(conjugate(&f, &[vec![1.0]]).unwrap().values[0], 0.5);
}

#[test]
fn conjugate_of_norm_vanishes_on_unit_ball() {
    let f = GridFunction::sample(&[(-1.0, 1.0); 2], &[41, 41], |x| dot(x, x).sqrt()).unwrap();
    let mut r = rng(2);
    let queries: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let (t, rad): (f64, f64) = (r.gen_range(0.0..std::f64::consts::TAU), r.gen_range(0.0..1.0));
            vec![rad * t.cos(), rad * t.sin()]
        })
        .collect();
    let c = conjugate(&f, &queries).unwrap();
    assert!(c.values.iter().all(|&v| v == 0.0));
}

#[test]
fn supremum_property_and_argmax() {
    let mut r = rng(4);
    let f = GridFunction::sample(&[(-1.0, 1.0), (-0.5, 1.5)], &[17, 21], |x| {
        (3.0 * x[0]).sin() * x[1] + x[0] * x[0]
    })
    .unwrap();
    let queries: Vec<Vec<f64>> = (0..50).map(|_| vec![r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)]).collect();
    let c = conjugate(&f, &queries).unwrap();
    for ((q, &v), &arg) in queries.iter().zip(&c.values).zip(&c.argmax) {
        for k in 0..f.len() {
            assert!(v >= dot(q, &f.node(k)) - f.value(k));
        }
        assert!((dot(q, &f.node(arg)) - f.value(arg) - v).abs() <= 1e-12);
    }
}

#[test]
fn order_reversal() {
    let mut r = rng(9);
    let bounds = [(-1.0, 1.0); 2];
    let f = GridFunction::sample(&bounds, &[15, 15], |x| x[0].powi(4) + x[1].exp()).unwrap();
    let bumps: Vec<f64> = (0..f.len()).map(|_| r.gen_range(0.0..0.3)).collect();
    let g = GridFunction::from_values(
        &bounds,
        &f.counts(),
        f.values().iter().zip(&bumps).map(|(a, b)| a + b).collect(),
    )
    .unwrap();
    let queries: Vec<Vec<f64>> = (0..100).map(|_| vec![r.gen_range(-4.0..4.0), r.gen_range(-4.0..4.0)]).collect();
    let cf = conjugate(&f, &queries).unwrap();
    let cg = conjugate(&g, &queries).unwrap();
    assert!(cf.values.iter().zip(&cg.values).all(|(a, b)| a >= b));
}

#[test]
fn quadratic_round_trip_random_spd() {
    let mut r = rng(13);
    let n = 101;
    let h = 2.0 / (n - 1) as f64;
    for _ in 0..10 {
        let eig = [r.gen_range(0.2..5.0), r.gen_range(0.2..5.0)];
        let m = symmetric_with_spectrum(&eig, &mut r);
        let inv = m.inverse().unwrap();
        let field = QuadraticField::new(m.clone());
        let f = GridFunction::sample(&[(-1.0, 1.0); 2], &[n, n], |x| field.value(x).unwrap()).unwrap();
        let queries: Vec<Vec<f64>> = (0..f.len())
            .map(|k| f.node(k))
            .filter(|x| dot(x, x) <= 0.64)
            .step_by(7)
            .map(|x| m.mul_vec(&x))
            .collect();
        let c = conjugate(&f, &queries).unwrap();
        for (q, v) in queries.iter().zip(&c.values) {
            let exact = 0.5 * inv.quadratic_form(q);
            assert!((v - exact).abs() <= 5.0 * m.max_eigenvalue() * h * h);
        }
    }
}

#[test]
fn involution_examples() {
    let f = GridFunction::sample(&[(-1.0, 1.0); 2], &[33, 33], |x| 0.5 * dot(x, x)).unwrap();
    let h = 2.0 / 32.0;
    let lip = 2f64.sqrt();
    assert!(involution_check(&f).unwrap() <= 2.0 * lip * h);

    let mut errs = Vec::new();
    for n in [257usize, 513] {
        let h = 2.0 / (n - 1) as f64;
        let q = GridFunction::sample(&[(-1.0, 1.0)], &[n], |x| x[0].powi(4)).unwrap();
        let e = involution_check(&q).unwrap();
        assert!(e <= 5.0 * h, "n={n}: {e}");
        errs.push(e);
    }
    assert!((errs[0] / errs[1]).log2() >= 0.9, "{errs:?}");

    let affine = GridFunction::sample(&[(-1.0, 1.0); 2], &[9, 9], |x| 0.7 * x[0] - 2.0 * x[1] + 0.3).unwrap();
    assert!(involution_check(&affine).unwrap() < 1e-12);

    let concave = GridFunction::sample(&[(-1.0, 1.0)], &[9], |x| -x[0] * x[0]).unwrap();
    assert!(matches!(involution_check(&concave), Err(Error::Inapplicable(_))));
}

#[test]
fn duality_examples() {
    let diag = Arc::new(QuadraticField::new(SymmetricMatrix::from_diagonal(&[2.0, 0.5])));
    let g = GridFunction::from_analytic(&[(-0.5, 0.5); 2], &[401, 401], diag).unwrap();
    let rep = hessian_duality_check(&g, &[0.05, -0.1]).unwrap();
    assert!(rep.inverse_hessian.sub(&SymmetricMatrix::from_diagonal(&[0.5, 2.0])).max_abs() < 1e-12);
    assert!(rep.discrepancy < 1e-2, "{}", rep.discrepancy);

    let id = Arc::new(QuadraticField::isotropic(2, 1.0));
    let g = GridFunction::from_analytic(&[(-0.5, 0.5); 2], &[201, 201], id).unwrap();
    for x0 in [[0.0, 0.0], [0.2, -0.1]] {
        let rep = hessian_duality_check(&g, &x0).unwrap();
        assert!(rep.discrepancy < 1e-10, "{}", rep.discrepancy);
    }

    // h = 1e-3 around x₀ = (0.5, 0)
    let g = GridFunction::from_analytic(&[(0.3, 0.7), (-0.2, 0.2)], &[401, 401], Arc::new(Quartic)).unwrap();
    let rep = hessian_duality_check(&g, &[0.5, 0.0]).unwrap();
    assert!(rep.discrepancy < 1e-3, "{}", rep.discrepancy);

    let flat = Arc::new(QuadraticField::new(SymmetricMatrix::from_diagonal(&[1.0, 0.01])));
    let g = GridFunction::from_analytic(&[(-0.5, 0.5); 2], &[21, 21], flat).unwrap();
    assert!(matches!(hessian_duality_check(&g, &[0.0, 0.0]), Err(Error::Degenerate(_))));
}

#[test]
fn distance_increasing_examples() {
    let mut r = rng(21);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..500)
        .map(|_| {
            let mut p = || vec![r.gen_range(-0.9..0.9), r.gen_range(-0.9..0.9)];
            (p(), p())
        })
        .collect();
    for a in [0.5, 2.0] {
        let g = GridFunction::from_analytic(&[(-1.0, 1.0); 2], &[9, 9], Arc::new(QuadraticField::isotropic(2, a))).unwrap();
        let ratio = distance_increasing_check(&g, a * a, &pairs).unwrap();
        assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
    }

    let (c, s) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
    let field = Arc::new(RotatedPogorelov {
        u: PogorelovSL::new(2.0).unwrap(),
        c,
        s,
    });
    let g = GridFunction::from_analytic(&[(-1.0, 1.0), (-0.95, 0.95)], &[41, 41], field).unwrap();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = pairs.into_iter().filter(|(a, b)| a != b).collect();
    let ratio = distance_increasing_check(&g, c * c, &pairs).unwrap();
    assert!(ratio >= 1.0 - 1e-6, "{ratio}");

    let p = vec![0.1, 0.1];
    assert!(distance_increasing_check(&g, c * c, &[(p.clone(), p)]).is_err());
}
