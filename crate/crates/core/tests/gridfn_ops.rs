use std::sync::Arc;

use slag_core::families::{pogorelov_eval, EmbeddedSemiconvex, PogorelovSL, SingularPhi};
use slag_core::gridfn::{
    fd_gradient, fd_hessian, semiconvexity_certify, sup_gradient_norm, sup_gradient_norm_where,
    AnalyticField, GridFunction, HessianSource, QuadraticField,
};
use slag_core::sampling::{rng, symmetric_with_spectrum};
use slag_core::Error;

fn centred_box(centre: &[f64], half: f64) -> Vec<(f64, f64)> {
    centre.iter().map(|c| (c - half, c + half)).collect()
}

#[test]
fn fd_gradient_of_pogorelov_at_probe() {
    let h = 1e-3;
    let bounds = centred_box(&[0.3, 0.2], 2.0 * h);
    let f = GridFunction::sample(&bounds, &[5, 5], |x| pogorelov_eval(2.0, x[0], x[1]).unwrap().u).unwrap();
    let g = fd_gradient(&f).unwrap();
    let k = g.nodes.iter().position(|&n| n == 12).unwrap();
    let exact = pogorelov_eval(2.0, 0.3, 0.2).unwrap();
    assert!((g.gradients[k][0] - exact.ux).abs() < 1e-4);
    assert!((g.gradients[k][1] - exact.uy).abs() < 1e-4);
}

#[test]
fn fd_hessian_exact_on_quadratics() {
    let mut r = rng(5);
    let m = symmetric_with_spectrum(&[2.0, -0.5, 0.7], &mut r);
    let field = QuadraticField::new(m.clone()).with_linear(vec![0.3, -1.0, 2.0], 4.0);
    let f = GridFunction::sample(&[(-1.0, 1.0); 3], &[7, 7, 7], |x| field.value(x).unwrap()).unwrap();
    let hf = fd_hessian(&f).unwrap();
    assert_eq!(hf.nodes.len(), 125);
    for hm in &hf.hessians {
        assert!(hm.sub(&m).max_abs() < 1e-12);
    }
    let gf = fd_gradient(&f).unwrap();
    for (&n, g) in gf.nodes.iter().zip(&gf.gradients) {
        let exact = field.gradient(&f.node(n)).unwrap();
        assert!(g.iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn fd_hessian_quartic_taylor_bound() {
    let h = 0.01;
    let f = GridFunction::sample(&[(1.0 - 2.0 * h, 1.0 + 2.0 * h)], &[5], |x| x[0].powi(4) / 12.0).unwrap();
    let hf = fd_hessian(&f).unwrap();
    let k = hf.nodes.iter().position(|&n| n == 2).unwrap();
    assert!((hf.hessians[k].get(0, 0) - 1.0).abs() <= 2.0 * h * h);
}

#[test]
fn fd_hessian_of_phi_at_origin() {
    let h = 1e-3;
    let phi = SingularPhi::new(1.0, vec![2.0]).unwrap();
    let f = GridFunction::sample(&centred_box(&[0.0; 4], 2.0 * h), &[5; 4], |x| phi.value(x).unwrap()).unwrap();
    let hf = fd_hessian(&f).unwrap();
    let centre = f.flat_index(&[2, 2, 2, 2]);
    let k = hf.nodes.iter().position(|&n| n == centre).unwrap();
    let eig = hf.hessians[k].eigen().values;
    for (a, b) in eig.iter().zip([2.0, 1.0, 1.0, 0.0]) {
        assert!((a - b).abs() < 1e-6, "{eig:?}");
    }
}

#[test]
fn semiconvexity_examples() {
    let t = 0.4f64.tan();
    let f = GridFunction::sample(&[(-1.0, 1.0); 2], &[9, 9], |x| -0.5 * t * (x[0] * x[0] + x[1] * x[1])).unwrap();
    let rep = semiconvexity_certify(&f, t).unwrap();
    assert_eq!(rep.source, HessianSource::FiniteDifference);
    assert!(rep.margin.abs() < 1e-12);

    let g = GridFunction::sample(&[(-1.0, 1.0); 3], &[7; 3], |x| -x.iter().map(|v| v * v).sum::<f64>()).unwrap();
    assert!((semiconvexity_certify(&g, 1.0).unwrap().margin + 1.0).abs() < 1e-12);

    // monotone in K
    for k in [0.0, 0.3, 1.7] {
        for eps in [1e-3, 0.25, 2.0] {
            let a = semiconvexity_certify(&g, k).unwrap().margin;
            let b = semiconvexity_certify(&g, k + eps).unwrap().margin;
            assert!((b - a - eps).abs() < 1e-14);
        }
    }
}

#[test]
fn embedded_example_is_semiconvex() {
    let theta = 0.5;
    let w = Arc::new(EmbeddedSemiconvex::new(2.0, theta, 3).unwrap());
    let ry = 0.9 * w.embedding.base.y_reach;
    let grid = GridFunction::from_analytic(&[(-0.9, 0.9), (-ry, ry), (-1.0, 1.0)], &[13, 13, 7], w).unwrap();
    let rep = semiconvexity_certify(&grid, theta.tan()).unwrap();
    assert_eq!(rep.source, HessianSource::Analytic);
    assert!(rep.margin >= -1e-8, "{}", rep.margin);
}

#[test]
fn sup_gradient_examples() {
    let n = 65;
    let h = 2.0 / (n - 1) as f64;
    let half = GridFunction::sample(&[(-1.0, 1.0); 2], &[n, n], |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
    let l = sup_gradient_norm_where(&half, |x| x[0] * x[0] + x[1] * x[1] <= 1.0).unwrap();
    assert!((l - 1.0).abs() <= h);

    let a = [0.6, -0.8, 2.0];
    let lin = GridFunction::sample(&[(-1.0, 1.0); 3], &[6, 7, 8], |x| a[0] * x[0] + a[1] * x[1] + a[2] * x[2]).unwrap();
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((sup_gradient_norm(&lin).unwrap() - norm).abs() < 1e-12);

    // u_M: the largest |u_x| sits at the corners, asinh(e^M / cos y)
    let m = 3.0;
    let um = Arc::new(PogorelovSL::new(m).unwrap());
    let grid = GridFunction::from_analytic(&[(-1.0, 1.0), (-0.999, 0.999)], &[41, 41], um.clone()).unwrap();
    let oracle = (m.exp() / 0.999f64.cos()).asinh();
    let max_ux = (0..grid.len())
        .map(|k| um.gradient(&grid.node(k)).unwrap()[0].abs())
        .fold(0.0, f64::max);
    assert!((max_ux - oracle).abs() < 1e-12);
    let l = sup_gradient_norm(&grid).unwrap();
    assert!(l >= oracle && l < oracle + 0.5, "{l} vs {oracle}");
}

// Errors are measured on the interior nodes of the coarsest grid so that
// every refinement is compared on the same point set.
fn errors_on_coarse_nodes(field: &Arc<dyn AnalyticField>, bounds: &[(f64, f64)], n: usize, stride: usize) -> (f64, f64) {
    let d = bounds.len();
    let g = GridFunction::from_analytic(bounds, &vec![n; d], field.clone()).unwrap();
    let on_coarse = |flat: usize| {
        let idx = g.multi_index(flat);
        idx.iter().all(|&i| i % stride == 0 && i > 0 && i < n - 1)
    };
    let gf = fd_gradient(&g).unwrap();
    let hf = fd_hessian(&g).unwrap();
    let mut eg = 0.0f64;
    for (&k, grad) in gf.nodes.iter().zip(&gf.gradients) {
        if on_coarse(k) {
            let exact = field.gradient(&g.node(k)).unwrap();
            eg = grad.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(eg, f64::max);
        }
    }
    let mut eh = 0.0f64;
    for (&k, hm) in hf.nodes.iter().zip(&hf.hessians) {
        if on_coarse(k) {
            eh = eh.max(hm.sub(&field.hessian(&g.node(k)).unwrap()).max_abs());
        }
    }
    (eg, eh)
}

#[test]
fn fd_error_decays_at_second_order() {
    let fields: Vec<(Arc<dyn AnalyticField>, Vec<(f64, f64)>)> = vec![
        (Arc::new(PogorelovSL::new(1.0).unwrap()), vec![(-0.5, 0.5), (-0.5, 0.5)]),
        (Arc::new(SingularPhi::new(2.0, vec![]).unwrap()), vec![(-0.3, 0.3); 3]),
    ];
    for (field, bounds) in fields {
        let errs: Vec<(f64, f64)> = [(9usize, 1usize), (17, 2), (33, 4)]
            .iter()
            .map(|&(n, stride)| errors_on_coarse_nodes(&field, &bounds, n, stride))
            .collect();
        for w in errs.windows(2) {
            assert!((w[0].0 / w[1].0).log2() >= 1.9, "{errs:?}");
            assert!((w[0].1 / w[1].1).log2() >= 1.9, "{errs:?}");
        }
    }
}

#[test]
fn text_and_json_round_trips() {
    let um = Arc::new(PogorelovSL::new(2.0).unwrap());
    let grid = GridFunction::from_analytic(&[(-0.9, 0.9), (-0.5, 0.7)], &[11, 6], um).unwrap();
    let back = GridFunction::from_text(&grid.to_text()).unwrap();
    assert_eq!(back.values(), grid.values());
    assert_eq!(back.bounds(), grid.bounds());
    let json = serde_json::to_string(&grid.to_json()).unwrap();
    let again = GridFunction::try_from(serde_json::from_str::<slag_core::gridfn::GridJson>(&json).unwrap()).unwrap();
    assert_eq!(again.values(), grid.values());
    assert!(matches!(GridFunction::from_text("2 0.1\n"), Err(Error::Parse(_))));
}

#[test]
fn too_few_nodes_rejected() {
    let r = GridFunction::sample(&[(0.0, 1.0)], &[2], |x| x[0]);
    assert!(r.is_err() || fd_hessian(&r.unwrap()).is_err());
}
