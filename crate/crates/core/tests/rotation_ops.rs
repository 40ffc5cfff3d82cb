use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::Arc;

use rand::Rng;
use slag_core::families::{EmbeddedSemiconvex, PogorelovSL};
use slag_core::gridfn::{sup_gradient_norm, GridFunction, QuadraticField};
use slag_core::harnack::affine_fit;
use slag_core::operator::Spectrum;
use slag_core::rotation::{
    gradient_image_volume, gradient_image_volume_where, hessian_rotate, hessian_rotate_direct,
    hessian_unrotate, hessian_unrotate_report, phase_shift_residual, rotate_function,
    subsolution_step1_check, subsolution_step1_spectrum,
};
use slag_core::sampling::{rng, symmetric_with_spectrum};
use slag_core::{sl_operator, Error, PhaseParams, SymmetricMatrix};

/// Random symmetric matrix whose eigen-angles stay above `−(π/2 − φ) + margin`.
fn admissible(n: usize, phi: f64, r: &mut impl Rng) -> SymmetricMatrix {
    let lo = -(FRAC_PI_2 - phi) + 0.05;
    let eig: Vec<f64> = (0..n).map(|_| r.gen_range(lo..1.4f64).tan()).collect();
    symmetric_with_spectrum(&eig, r)
}

#[test]
fn rotate_examples() {
    for n in 1..=5 {
        for phi in [0.1f64, 0.7, 1.3] {
            let r = hessian_rotate(&SymmetricMatrix::zeros(n), phi).unwrap();
            assert!(r.sub(&SymmetricMatrix::scalar(n, -phi.tan())).max_abs() < 1e-15);
        }
    }
    for (alpha, phi) in [(1.0, 0.3), (-0.4, 0.5), (1.5, 1.2)] {
        let r = hessian_rotate(&SymmetricMatrix::scalar(3, f64::tan(alpha)), phi).unwrap();
        let want = SymmetricMatrix::scalar(3, (alpha - phi).tan());
        assert!(r.sub(&want).max_abs() < 1e-12 * (1.0 + want.max_abs()));
    }

    let mut r = rng(31);
    for _ in 0..100 {
        let m = admissible(4, 0.3, &mut r);
        let drop = sl_operator(&m) - sl_operator(&hessian_rotate(&m, 0.3).unwrap());
        assert!((drop - 1.2).abs() < 1e-10);
    }

    let bad = SymmetricMatrix::scalar(2, -1.0 / 0.3f64.tan() - 0.1);
    assert!(matches!(hessian_rotate(&bad, 0.3), Err(Error::RotationOutOfRange(_))));
}

#[test]
fn unrotate_examples() {
    let phi: f64 = 0.6;
    let back = hessian_unrotate(&SymmetricMatrix::scalar(3, -phi.tan()), phi).unwrap();
    assert!(back.max_abs() < 1e-15);

    let mut r = rng(37);
    for _ in 0..1000 {
        let n = r.gen_range(2..=5);
        let phi = r.gen_range(0.05..1.4);
        let m = admissible(n, phi, &mut r);
        let round = hessian_unrotate(&hessian_rotate(&m, phi).unwrap(), phi).unwrap();
        assert!(round.sub(&m).max_abs() < 1e-10 * (1.0 + m.max_abs()));
    }

    // approaching cot φ from below: large but finite output, conditioning reported
    let cot = 1.0 / phi.tan();
    let mut last = 0.0;
    for gap in [1e-2, 1e-5, 1e-8] {
        let rep = hessian_unrotate_report(&SymmetricMatrix::from_diagonal(&[cot - gap, 0.0]), phi).unwrap();
        let top = rep.matrix.max_eigenvalue();
        assert!(top.is_finite() && top > last);
        assert!(rep.condition() > 1.0 / (2.0 * gap));
        last = top;
    }
    let over = SymmetricMatrix::from_diagonal(&[cot + 1e-3, 0.0]);
    assert!(matches!(hessian_unrotate(&over, phi), Err(Error::RotationOutOfRange(_))));
}

#[test]
fn additivity_and_phase_shift() {
    let mut r = rng(41);
    for _ in 0..300 {
        let n = r.gen_range(2..=5);
        let (p1, p2) = (r.gen_range(0.0..0.6), r.gen_range(0.0..0.6));
        let m = admissible(n, p1 + p2, &mut r);
        let twice = hessian_rotate(&hessian_rotate(&m, p1).unwrap(), p2).unwrap();
        let once = hessian_rotate(&m, p1 + p2).unwrap();
        assert!(twice.sub(&once).max_abs() < 1e-10 * (1.0 + once.max_abs()));
        let direct = hessian_rotate_direct(&m, p1).unwrap();
        assert!(direct.sub(&hessian_rotate(&m, p1).unwrap()).max_abs() < 1e-10 * (1.0 + direct.max_abs()));
    }
    for n in 2..=6 {
        for _ in 0..1000 {
            let phi = r.gen_range(0.0..1.5);
            let m = admissible(n, phi, &mut r);
            assert!(phase_shift_residual(&m, phi).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn rotate_function_on_quadratics() {
    let params = PhaseParams::derive(2, 1.0).unwrap();
    let phi = params.phi;
    for a in [0.5, 1.0, 2.5] {
        let u = GridFunction::from_analytic(&[(-1.0, 1.0); 2], &[21, 21], Arc::new(QuadraticField::isotropic(2, a))).unwrap();
        let g = rotate_function(&u, &params, 0.0).unwrap();
        assert_eq!(g.argmax_mismatches, 0);
        let b = (a.atan() - phi).tan();
        // ū − ½b|x̄|² is constant across samples
        let offsets: Vec<f64> = g
            .x_bar
            .iter()
            .zip(&g.u_bar)
            .map(|(x, v)| v - 0.5 * b * x.iter().map(|t| t * t).sum::<f64>())
            .collect();
        let spread = offsets.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
            - offsets.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        assert!(spread < 1e-12, "a={a}: {spread}");
        for hb in g.hessian_bar.as_ref().unwrap() {
            assert!(hb.sub(&SymmetricMatrix::scalar(2, b)).max_abs() < 1e-12);
        }
        // x̄ = c x + s ∇u and ȳ = −s x + c ∇u
        for ((x, xb), yb) in g.x.iter().zip(&g.x_bar).zip(&g.y_bar) {
            for i in 0..2 {
                assert!((xb[i] - (params.c + params.s * a) * x[i]).abs() < 1e-10);
                assert!((yb[i] - (-params.s + params.c * a) * x[i]).abs() < 1e-10);
            }
        }
        // least-squares slopes on scattered points are first-order accurate
        assert!(g.gradient_residual <= g.h[0] * (1.0 + b.abs()), "{}", g.gradient_residual);
    }

    let concave = GridFunction::sample(&[(-1.0, 1.0); 2], &[9, 9], |x| -(x[0] * x[0] + x[1] * x[1])).unwrap();
    assert!(matches!(rotate_function(&concave, &params, 0.5), Err(Error::Inapplicable(_))));
}

#[test]
fn rotate_function_identity_when_phi_is_zero() {
    let params = PhaseParams::with_rotation(2, 1.0, 0.0).unwrap();
    let u = GridFunction::sample(&[(-1.0, 1.0); 2], &[9, 9], |x| x[0].powi(3) - x[1]).unwrap();
    let g = rotate_function(&u, &params, 0.0).unwrap();
    assert_eq!(g.x_bar, g.x);
}

#[test]
fn rotated_embedded_example_bounds_and_phase() {
    for (theta, n) in [(0.5, 3), (0.3, 4)] {
        let w = Arc::new(EmbeddedSemiconvex::new(2.0, theta, n).unwrap());
        let params = PhaseParams::derive(n, w.phase()).unwrap();
        assert!((params.theta - theta).abs() < 1e-14);
        let ry = 0.9 * w.embedding.base.y_reach;
        let mut bounds = vec![(-0.9, 0.9), (-ry, ry)];
        let mut counts = vec![13, 13];
        for _ in 2..n {
            bounds.push((-1.0, 1.0));
            counts.push(5);
        }
        let grid = GridFunction::from_analytic(&bounds, &counts, w.clone()).unwrap();
        let g = rotate_function(&grid, &params, theta.tan()).unwrap();
        let (lo, hi) = g.hessian_range().unwrap();
        let floor = (-theta - params.phi).tan();
        let ceil = (FRAC_PI_2 - params.phi).tan();
        assert!(lo >= floor - 1e-9 * floor.abs(), "{lo} vs {floor}");
        assert!(hi <= ceil, "{hi} vs {ceil}");
        let target = params.rotated_phase();
        for (x, hb) in g.x.iter().zip(g.hessian_bar.as_ref().unwrap()) {
            assert!((sl_operator(hb) - target).abs() < 1e-7, "at {x:?}");
        }
    }
}

#[test]
fn step1_examples() {
    let params = PhaseParams::derive(3, 0.0).unwrap();
    let low = -(params.theta + params.phi).tan();
    let sat = SymmetricMatrix::from_diagonal(&[(FRAC_PI_2 - params.phi).tan(), low, low]);
    let rep = subsolution_step1_check(&sat, &params).unwrap();
    assert!(rep.margin.abs() < 1e-12);

    let mut r = rng(43);
    for n in 2..=6 {
        let lower = if n == 2 { 0.0 } else { -((n as f64) - 2.0) * FRAC_PI_2 };
        for k in 1..=5 {
            let phase = lower + (FRAC_PI_2 - lower) * k as f64 / 6.0;
            let p = PhaseParams::derive(n, phase).unwrap();
            let floor = -(p.theta + p.phi);
            for _ in 0..10_000 {
                let mut angles = vec![r.gen_range(FRAC_PI_2 - p.phi..FRAC_PI_2)];
                angles.extend((1..n).map(|_| r.gen_range(floor..FRAC_PI_2)));
                let s = Spectrum::from_angles(&angles).unwrap();
                let rep = subsolution_step1_spectrum(&s, &p, p.theta).unwrap();
                assert!(rep.margin > 0.0, "n={n} phase={phase}: {}", rep.margin);
            }
        }
    }

    // widening the lower bound by 0.1 admits a spectrum below the rotated phase
    let wide = params.theta + 0.1;
    let mut angles = vec![FRAC_PI_2 - params.phi];
    angles.extend([-(wide + params.phi); 2]);
    let s = Spectrum::from_angles(&angles).unwrap();
    let rep = subsolution_step1_spectrum(&s, &params, wide).unwrap();
    assert!(rep.margin < -0.19, "{}", rep.margin);
    assert!(matches!(subsolution_step1_spectrum(&s, &params, params.theta), Err(Error::Inapplicable(_))));
}

#[test]
fn volume_examples() {
    let params = PhaseParams::with_rotation(2, FRAC_PI_2, FRAC_PI_4).unwrap();
    let (c, s) = (params.c, params.s);
    let area = 4.0;
    let zero = GridFunction::from_analytic(&[(-1.0, 1.0); 2], &[11, 11], Arc::new(QuadraticField::isotropic(2, 0.0))).unwrap();
    assert!((gradient_image_volume(&zero, &params).unwrap() - c * c * area).abs() < 1e-12);
    let zero_fd = GridFunction::sample(&[(-1.0, 1.0); 2], &[11, 11], |_| 0.0).unwrap();
    assert!(gradient_image_volume(&zero_fd, &params).unwrap() > 0.0);

    let a = 1.5;
    let n = 401;
    let h = 2.0 / (n - 1) as f64;
    let quad = GridFunction::from_analytic(&[(-1.0, 1.0); 2], &[n, n], Arc::new(QuadraticField::isotropic(2, a))).unwrap();
    let vol = gradient_image_volume_where(&quad, &params, |x| x[0] * x[0] + x[1] * x[1] <= 1.0).unwrap();
    let exact = (c + s * a).powi(2) * std::f64::consts::PI;
    // cells straddling the circle: perimeter times one cell width
    assert!((vol - exact).abs() <= (c + s * a).powi(2) * 2.0 * std::f64::consts::PI * h, "{vol} vs {exact}");

    let ms: Vec<f64> = (1..=6).map(|m| m as f64).collect();
    let mut vols = Vec::new();
    let mut ratios = Vec::new();
    for &m in &ms {
        let u = GridFunction::from_analytic(&[(-1.0, 1.0), (-0.99, 0.99)], &[81, 81], Arc::new(PogorelovSL::new(m).unwrap())).unwrap();
        let v = gradient_image_volume(&u, &params).unwrap();
        let l = sup_gradient_norm(&u).unwrap();
        vols.push(v);
        ratios.push(v / (1.0 + l));
    }
    let fit = affine_fit(&ms, &vols).unwrap();
    assert!(fit.slope > 0.0 && fit.max_relative_residual <= 0.1, "{fit:?}");
    let (rmin, rmax) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    assert!(rmax / rmin < 3.0, "{ratios:?}");
}
