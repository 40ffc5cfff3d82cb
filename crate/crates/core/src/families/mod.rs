//! Closed-form solution families.
//!
//! Every family implements [`SolutionFamily`] and is constructed through a
//! [`FamilyRegistry`], which maps a variant name to a builder. Callers pick a
//! family at runtime from an [`ExampleSpec`], usually parsed from JSON.

mod embedded;
mod partial;
mod pogorelov;
mod singular;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::AnalyticField;
use crate::matrix::SymmetricMatrix;
use crate::sampling;

pub use embedded::{embed, EmbedSample, EmbeddedConvex, EmbeddedSemiconvex, Embedding};
pub use partial::{partial_rotate_2d, PartialRotated, PartialSample};
pub use pogorelov::{g_eval, pogorelov_eval, PogorelovJet, PogorelovSL};
pub use singular::{
    nondegen_check, phi_closed_spectrum, phi_eval, sharpness_parameters, sublevel_component,
    sublevel_diameter, sublevel_epsilon_max, NonDegenReport, PhiSample, SharpnessParameters,
    SingularPhi, SublevelComponent,
};

/// Parameters of one solution family. JSON form is internally tagged by
/// `variant`, e.g. `{"variant": "PogorelovSL", "M": 2.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", deny_unknown_fields)]
pub enum ExampleSpec {
    PogorelovSL {
        #[serde(rename = "M")]
        m: f64,
    },
    PartialRotated {
        #[serde(rename = "M")]
        m: f64,
        theta: f64,
    },
    EmbeddedSemiconvex {
        #[serde(rename = "M")]
        m: f64,
        theta: f64,
        n: usize,
    },
    EmbeddedConvex {
        #[serde(rename = "M")]
        m: f64,
        theta: f64,
        #[serde(rename = "A")]
        a: f64,
        n: usize,
    },
    SingularPhi {
        lambda: f64,
        #[serde(default)]
        a: Vec<f64>,
    },
}

impl ExampleSpec {
    pub fn variant(&self) -> &'static str {
        match self {
            ExampleSpec::PogorelovSL { .. } => "PogorelovSL",
            ExampleSpec::PartialRotated { .. } => "PartialRotated",
            ExampleSpec::EmbeddedSemiconvex { .. } => "EmbeddedSemiconvex",
            ExampleSpec::EmbeddedConvex { .. } => "EmbeddedConvex",
            ExampleSpec::SingularPhi { .. } => "SingularPhi",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// One identity checked over a set of probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equation: String,
    /// Max of absolute residuals over the probes.
    pub max_residual: f64,
    pub probes: usize,
    /// Finite-difference step, when one was used.
    pub h: Option<f64>,
    pub tolerance: f64,
    /// Reported quantity that is not itself a residual.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl ResidualReport {
    pub fn new(equation: impl Into<String>, residuals: &[f64], tolerance: f64) -> Self {
        Self {
            equation: equation.into(),
            max_residual: residuals.iter().fold(0.0_f64, |a, r| a.max(r.abs())),
            probes: residuals.len(),
            h: None,
            tolerance,
            value: None,
        }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub probes: usize,
    pub seed: u64,
    /// Base finite-difference step for cross-checks.
    pub fd_step: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            probes: 1000,
            seed: 0,
            fd_step: 1e-3,
        }
    }
}

/// A closed-form family with analytic derivatives and its own residual suite.
pub trait SolutionFamily: AnalyticField {
    fn name(&self) -> &'static str;

    fn spec(&self) -> ExampleSpec;

    /// Constant value of `F(D²u)`, when the family solves the equation.
    fn target_phase(&self) -> Option<f64>;

    /// Box on which probes are drawn.
    fn probe_box(&self) -> Vec<(f64, f64)>;

    fn verify(&self, opts: &VerifyOptions) -> Result<Vec<ResidualReport>>;

    fn probes(&self, opts: &VerifyOptions) -> Vec<Vec<f64>> {
        let bounds = self.probe_box();
        let mut rng = sampling::rng(opts.seed);
        (0..opts.probes)
            .map(|_| sampling::uniform_point(&bounds, &mut rng))
            .collect()
    }
}

pub type FamilyBuilder = Box<dyn Fn(&ExampleSpec) -> Result<Arc<dyn SolutionFamily>> + Send + Sync>;

/// Name-keyed table of family builders.
pub struct FamilyRegistry {
    builders: BTreeMap<String, FamilyBuilder>,
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    /// Registry holding every built-in family.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("PogorelovSL", |spec| match *spec {
            ExampleSpec::PogorelovSL { m } => Ok(Arc::new(PogorelovSL::new(m)?)),
            _ => Err(mismatch("PogorelovSL", spec)),
        });
        r.register("PartialRotated", |spec| match *spec {
            ExampleSpec::PartialRotated { m, theta } => Ok(Arc::new(PartialRotated::new(m, theta)?)),
            _ => Err(mismatch("PartialRotated", spec)),
        });
        r.register("EmbeddedSemiconvex", |spec| match *spec {
            ExampleSpec::EmbeddedSemiconvex { m, theta, n } => {
                Ok(Arc::new(EmbeddedSemiconvex::new(m, theta, n)?))
            }
            _ => Err(mismatch("EmbeddedSemiconvex", spec)),
        });
        r.register("EmbeddedConvex", |spec| match *spec {
            ExampleSpec::EmbeddedConvex { m, theta, a, n } => {
                Ok(Arc::new(EmbeddedConvex::new(m, theta, a, n)?))
            }
            _ => Err(mismatch("EmbeddedConvex", spec)),
        });
        r.register("SingularPhi", |spec| match spec {
            ExampleSpec::SingularPhi { lambda, a } => Ok(Arc::new(SingularPhi::new(*lambda, a.clone())?)),
            _ => Err(mismatch("SingularPhi", spec)),
        });
        r
    }

    /// Adds or replaces the builder for `name`.
    pub fn register(
        &mut self,
        name: impl Into<String>,
        builder: impl Fn(&ExampleSpec) -> Result<Arc<dyn SolutionFamily>> + Send + Sync + 'static,
    ) {
        self.builders.insert(name.into(), Box::new(builder));
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(name)
    }

    pub fn build(&self, spec: &ExampleSpec) -> Result<Arc<dyn SolutionFamily>> {
        let builder = self
            .builders
            .get(spec.variant())
            .ok_or_else(|| Error::invalid(format!("no family registered as {}", spec.variant())))?;
        builder(spec)
    }

    pub fn build_json(&self, text: &str) -> Result<Arc<dyn SolutionFamily>> {
        self.build(&ExampleSpec::from_json(text)?)
    }
}

fn mismatch(name: &str, spec: &ExampleSpec) -> Error {
    Error::invalid(format!("builder {name} cannot build a {} spec", spec.variant()))
}

pub(crate) fn require_m(m: f64) -> Result<()> {
    if !(m.is_finite() && m >= 1.0) {
        return Err(Error::invalid(format!("M must be at least 1, got {m}")));
    }
    Ok(())
}

/// Central-difference Hessian of a field built from its analytic gradient,
/// with one step per axis.
pub fn gradient_fd_hessian(
    field: &(impl AnalyticField + ?Sized),
    x: &[f64],
    steps: &[f64],
) -> Result<SymmetricMatrix> {
    let d = x.len();
    let mut cols = Vec::with_capacity(d);
    for j in 0..d {
        let mut p = x.to_vec();
        let mut q = x.to_vec();
        p[j] += steps[j];
        q[j] -= steps[j];
        let gp = field.gradient(&p)?;
        let gq = field.gradient(&q)?;
        cols.push(
            gp.iter()
                .zip(&gq)
                .map(|(a, b)| (a - b) / (2.0 * steps[j]))
                .collect::<Vec<f64>>(),
        );
    }
    Ok(SymmetricMatrix::from_fn(d, |i, j| 0.5 * (cols[j][i] + cols[i][j])))
}

/// Central-difference Hessian of a scalar map from values alone.
pub fn value_fd_hessian(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<SymmetricMatrix> {
    let d = x.len();
    let at = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut p = x.to_vec();
        for &(i, s) in shifts {
            p[i] += s;
        }
        f(&p)
    };
    let f0 = f(x)?;
    let mut m = SymmetricMatrix::zeros(d);
    for i in 0..d {
        let v = (at(&[(i, h)])? - 2.0 * f0 + at(&[(i, -h)])?) / (h * h);
        m.set(i, i, v);
        for j in i + 1..d {
            let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                + at(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            m.set(i, j, v);
        }
    }
    Ok(m)
}
