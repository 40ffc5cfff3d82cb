use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GridFunction;
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Record of the finite-difference scheme behind a derived field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub scheme: String,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GradientField {
    /// Flat node indices (boundary ring excluded).
    pub nodes: Vec<usize>,
    pub gradients: Vec<Vec<f64>>,
    pub stencil: Stencil,
    /// Max discrepancy against the closed form, when one is attached.
    pub analytic_error: Option<f64>,
    /// `analytic_error / max(h)²`
    pub error_constant: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HessianField {
    pub nodes: Vec<usize>,
    pub hessians: Vec<SymmetricMatrix>,
    pub stencil: Stencil,
    pub analytic_error: Option<f64>,
    pub error_constant: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianSource {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconvexityReport {
    /// `min λ_min(D²f) + K` over interior nodes.
    pub margin: f64,
    pub worst_point: Vec<f64>,
    pub source: HessianSource,
}

impl SemiconvexityReport {
    pub fn certified(&self, tol: f64) -> bool {
        self.margin >= -tol
    }
}

fn check_margin(f: &GridFunction) -> Result<()> {
    if f.axes.iter().any(|a| a.count < 3) {
        return Err(Error::InsufficientMargin(
            "central differences need at least one interior node per axis".into(),
        ));
    }
    Ok(())
}

fn gradient_at_node(f: &GridFunction, k: usize) -> Vec<f64> {
    (0..f.dim())
        .map(|a| {
            let s = f.stride(a);
            let h = f.axes[a].spacing();
            (f.values[k + s] - f.values[k - s]) / (2.0 * h)
        })
        .collect()
}

fn hessian_at_node(f: &GridFunction, k: usize) -> SymmetricMatrix {
    let v = &f.values;
    let d = f.dim();
    SymmetricMatrix::from_fn(d, |i, j| {
        let si = f.stride(i);
        let hi = f.axes[i].spacing();
        if i == j {
            (v[k + si] - 2.0 * v[k] + v[k - si]) / (hi * hi)
        } else {
            let sj = f.stride(j);
            let hj = f.axes[j].spacing();
            (v[k + si + sj] - v[k + si - sj] - v[k - si + sj] + v[k - si - sj]) / (4.0 * hi * hj)
        }
    })
}

fn max_h(f: &GridFunction) -> f64 {
    f.spacing().into_iter().fold(0.0, f64::max)
}

/// Second-order central differences at every interior node.
pub fn fd_gradient(f: &GridFunction) -> Result<GradientField> {
    check_margin(f)?;
    let nodes = f.interior_nodes();
    let gradients: Vec<Vec<f64>> = nodes.par_iter().map(|&k| gradient_at_node(f, k)).collect();
    let analytic_error = match f.analytic() {
        Some(field) => {
            let errs = nodes
                .par_iter()
                .zip(&gradients)
                .map(|(&k, g)| {
                    let exact = field.gradient(&f.node(k))?;
                    Ok(exact
                        .iter()
                        .zip(g)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(errs.into_iter().fold(0.0, f64::max))
        }
        None => None,
    };
    let h = max_h(f);
    Ok(GradientField {
        nodes,
        gradients,
        stencil: Stencil {
            scheme: "central difference".into(),
            h: f.spacing(),
        },
        analytic_error,
        error_constant: analytic_error.map(|e| e / (h * h)),
    })
}

/// Central second differences with the 4-point cross stencil for mixed
/// partials; exact on quadratics.
pub fn fd_hessian(f: &GridFunction) -> Result<HessianField> {
    check_margin(f)?;
    let nodes = f.interior_nodes();
    let hessians: Vec<SymmetricMatrix> = nodes.par_iter().map(|&k| hessian_at_node(f, k)).collect();
    let analytic_error = match f.analytic() {
        Some(field) => {
            let errs = nodes
                .par_iter()
                .zip(&hessians)
                .map(|(&k, m)| Ok(field.hessian(&f.node(k))?.sub(m).max_abs()))
                .collect::<Result<Vec<f64>>>()?;
            Some(errs.into_iter().fold(0.0, f64::max))
        }
        None => None,
    };
    let h = max_h(f);
    Ok(HessianField {
        nodes,
        hessians,
        stencil: Stencil {
            scheme: "central second difference, 4-point cross for mixed terms".into(),
            h: f.spacing(),
        },
        analytic_error,
        error_constant: analytic_error.map(|e| e / (h * h)),
    })
}

/// Minimum over interior nodes of `λ_min(D²f) + K`. A nonnegative margin
/// certifies that `f + K|x|²/2` is discretely convex.
pub fn semiconvexity_certify(f: &GridFunction, k: f64) -> Result<SemiconvexityReport> {
    check_margin(f)?;
    let nodes = f.interior_nodes();
    let (source, mins): (HessianSource, Vec<f64>) = match f.analytic() {
        Some(field) => (
            HessianSource::Analytic,
            nodes
                .par_iter()
                .map(|&n| Ok(field.hessian(&f.node(n))?.min_eigenvalue()))
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => (
            HessianSource::FiniteDifference,
            nodes
                .par_iter()
                .map(|&n| hessian_at_node(f, n).min_eigenvalue())
                .collect(),
        ),
    };
    let (worst, min_lambda) = mins
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    Ok(SemiconvexityReport {
        margin: min_lambda + k,
        worst_point: f.node(nodes[worst]),
        source,
    })
}

/// `max |∇f|` over the grid nodes.
pub fn sup_gradient_norm(f: &GridFunction) -> Result<f64> {
    sup_gradient_norm_where(f, |_| true)
}

/// `max |∇f|` over the nodes accepted by `region`. Closed-form gradients are
/// used at every node when available; otherwise central differences at
/// interior nodes.
pub fn sup_gradient_norm_where(
    f: &GridFunction,
    region: impl Fn(&[f64]) -> bool + Sync,
) -> Result<f64> {
    let norms: Vec<f64> = match f.analytic() {
        Some(field) => (0..f.len())
            .into_par_iter()
            .filter_map(|k| {
                let x = f.node(k);
                region(&x).then(|| field.gradient(&x))
            })
            .map(|g| g.map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt()))
            .collect::<Result<Vec<f64>>>()?,
        None => {
            check_margin(f)?;
            f.interior_nodes()
                .into_par_iter()
                .filter(|&k| region(&f.node(k)))
                .map(|k| gradient_at_node(f, k).iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect()
        }
    };
    Ok(norms.into_iter().fold(0.0, f64::max))
}
