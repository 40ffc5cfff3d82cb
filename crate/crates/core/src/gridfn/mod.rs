//! Scalar functions sampled on uniform box grids.
//!
//! Values are stored row-major with the last axis varying fastest. A grid may
//! carry an [`AnalyticField`] giving exact value, gradient and Hessian at
//! arbitrary points; finite differences are then only a cross-check.

mod fd;
mod io;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

pub use fd::{
    fd_gradient, fd_hessian, semiconvexity_certify, sup_gradient_norm, sup_gradient_norm_where,
    GradientField, HessianField, HessianSource, SemiconvexityReport, Stencil,
};
pub use io::GridJson;

/// Minimum number of nodes per axis.
pub const MIN_NODES_PER_AXIS: usize = 5;

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymmetricMatrix,
}

/// Closed-form evaluator for a smooth scalar field.
pub trait AnalyticField: Send + Sync {
    fn dim(&self) -> usize;

    fn jet(&self, x: &[f64]) -> Result<Jet>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x)?.value)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(x)?.gradient)
    }

    fn hessian(&self, x: &[f64]) -> Result<SymmetricMatrix> {
        Ok(self.jet(x)?.hessian)
    }
}

/// `½⟨x, Mx⟩ + b·x + c`
#[derive(Debug, Clone)]
pub struct QuadraticField {
    pub matrix: SymmetricMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl QuadraticField {
    pub fn new(matrix: SymmetricMatrix) -> Self {
        let n = matrix.dim();
        Self {
            matrix,
            linear: vec![0.0; n],
            constant: 0.0,
        }
    }

    /// `½ a |x|²` in dimension `n`.
    pub fn isotropic(n: usize, a: f64) -> Self {
        Self::new(SymmetricMatrix::scalar(n, a))
    }

    pub fn with_linear(mut self, linear: Vec<f64>, constant: f64) -> Self {
        self.linear = linear;
        self.constant = constant;
        self
    }
}

impl AnalyticField for QuadraticField {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        let mx = self.matrix.mul_vec(x);
        let value = 0.5 * mx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            + self.linear.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            + self.constant;
        let gradient = mx.iter().zip(&self.linear).map(|(a, b)| a + b).collect();
        Ok(Jet {
            value,
            gradient,
            hessian: self.matrix.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

#[derive(Clone)]
pub struct GridFunction {
    axes: Vec<Axis>,
    values: Vec<f64>,
    analytic: Option<Arc<dyn AnalyticField>>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("axes", &self.axes)
            .field("nodes", &self.values.len())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

fn build_axes(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Vec<Axis>> {
    if bounds.is_empty() || bounds.len() != counts.len() {
        return Err(Error::invalid("bounds and counts must be non-empty and of equal length"));
    }
    bounds
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), &count)| {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("bad axis interval [{lo}, {hi}]")));
            }
            if count < MIN_NODES_PER_AXIS {
                return Err(Error::InsufficientMargin(format!(
                    "axis has {count} nodes, need at least {MIN_NODES_PER_AXIS}"
                )));
            }
            Ok(Axis { lo, hi, count })
        })
        .collect()
}

impl GridFunction {
    pub fn from_values(bounds: &[(f64, f64)], counts: &[usize], values: Vec<f64>) -> Result<Self> {
        let axes = build_axes(bounds, counts)?;
        let total: usize = counts.iter().product();
        if values.len() != total {
            return Err(Error::invalid(format!(
                "expected {total} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            axes,
            values,
            analytic: None,
        })
    }

    pub fn sample(
        bounds: &[(f64, f64)],
        counts: &[usize],
        f: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Self> {
        let axes = build_axes(bounds, counts)?;
        let mut grid = Self {
            axes,
            values: Vec::new(),
            analytic: None,
        };
        let total: usize = counts.iter().product();
        grid.values = (0..total)
            .into_par_iter()
            .map(|k| f(&grid.node(k)))
            .collect();
        Ok(grid)
    }

    pub fn from_analytic(
        bounds: &[(f64, f64)],
        counts: &[usize],
        field: Arc<dyn AnalyticField>,
    ) -> Result<Self> {
        if field.dim() != bounds.len() {
            return Err(Error::invalid("field dimension does not match grid"));
        }
        let axes = build_axes(bounds, counts)?;
        let mut grid = Self {
            axes,
            values: Vec::new(),
            analytic: None,
        };
        let total: usize = counts.iter().product();
        grid.values = (0..total)
            .into_par_iter()
            .map(|k| field.value(&grid.node(k)))
            .collect::<Result<Vec<f64>>>()?;
        grid.analytic = Some(field);
        Ok(grid)
    }

    /// Attaches closed-form evaluators after checking them against the
    /// sampled values.
    pub fn with_analytic(mut self, field: Arc<dyn AnalyticField>) -> Result<Self> {
        if field.dim() != self.dim() {
            return Err(Error::invalid("field dimension does not match grid"));
        }
        for k in 0..self.len() {
            let exact = field.value(&self.node(k))?;
            let stored = self.values[k];
            if (exact - stored).abs() > 1e-12 * exact.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "analytic value {exact} disagrees with sample {stored} at node {k}"
                )));
            }
        }
        self.analytic = Some(field);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::spacing).collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a.lo, a.hi)).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn analytic(&self) -> Option<&Arc<dyn AnalyticField>> {
        self.analytic.as_ref()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            idx[d] = flat % axis.count;
            flat /= axis.count;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.count + i)
    }

    /// Stride of one step along `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.count).product()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis.coordinate(i))
            .collect()
    }

    /// Nodes at least `margin` steps away from every face.
    pub fn is_interior(&self, idx: &[usize], margin: usize) -> bool {
        idx.iter()
            .zip(&self.axes)
            .all(|(&i, axis)| i >= margin && i + margin < axis.count)
    }

    /// Flat indices of the nodes off the boundary ring of width one.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.is_interior(&self.multi_index(k), 1))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.axes)
                .all(|(&v, a)| v >= a.lo - 1e-12 * a.spacing() && v <= a.hi + 1e-12 * a.spacing())
    }

    /// Multilinear interpolation of the samples.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::outside(x, "point outside the grid box"));
        }
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for (k, axis) in self.axes.iter().enumerate() {
            let t = ((x[k] - axis.lo) / axis.spacing()).clamp(0.0, (axis.count - 1) as f64);
            let i = (t.floor() as usize).min(axis.count - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                idx[k] = base[k] + bit;
                weight *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if weight != 0.0 {
                acc += weight * self.values[self.flat_index(&idx)];
            }
        }
        Ok(acc)
    }

    /// Gradient at an arbitrary point: exact when a closed form is attached,
    /// otherwise central differences of the interpolant.
    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(field) = &self.analytic {
            return field.gradient(x);
        }
        let mut g = Vec::with_capacity(self.dim());
        for (k, axis) in self.axes.iter().enumerate() {
            let h = axis.spacing();
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[k] = (x[k] + h).min(axis.hi);
            minus[k] = (x[k] - h).max(axis.lo);
            let width = plus[k] - minus[k];
            g.push((self.interpolate(&plus)? - self.interpolate(&minus)?) / width);
        }
        Ok(g)
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.count - 1).product()
    }

    /// Midpoint of cell `flat` (cells are ordered like nodes, last axis fastest).
    pub fn cell_midpoint(&self, mut flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let cells = axis.count - 1;
            let i = flat % cells;
            flat /= cells;
            x[k] = axis.lo + (i as f64 + 0.5) * axis.spacing();
        }
        x
    }

    pub fn cell_midpoints(&self) -> Vec<Vec<f64>> {
        (0..self.cell_count()).map(|k| self.cell_midpoint(k)).collect()
    }
}
