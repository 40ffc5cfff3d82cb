//! Plain-text and JSON serialization.
//!
//! Text layout: one header line `dim h_1 … h_d n_1 … n_d lo_1 hi_1 … lo_d hi_d`
//! followed by one sample per line in row-major order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::GridFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    pub dim: usize,
    pub h: Vec<f64>,
    pub counts: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
    pub values: Vec<f64>,
}

impl From<&GridFunction> for GridJson {
    fn from(f: &GridFunction) -> Self {
        Self {
            dim: f.dim(),
            h: f.spacing(),
            counts: f.counts(),
            bounds: f.bounds(),
            values: f.values().to_vec(),
        }
    }
}

impl TryFrom<GridJson> for GridFunction {
    type Error = Error;

    fn try_from(g: GridJson) -> Result<Self> {
        if g.bounds.len() != g.dim || g.counts.len() != g.dim {
            return Err(Error::Parse("dim disagrees with bounds/counts".into()));
        }
        GridFunction::from_values(&g.bounds, &g.counts, g.values)
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("header truncated at {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse {what}")))
}

impl GridFunction {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(24 * (self.len() + 4));
        let _ = write!(out, "{}", self.dim());
        for h in self.spacing() {
            let _ = write!(out, " {h:.16e}");
        }
        for n in self.counts() {
            let _ = write!(out, " {n}");
        }
        for (lo, hi) in self.bounds() {
            let _ = write!(out, " {lo:.16e} {hi:.16e}");
        }
        out.push('\n');
        for v in self.values() {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }

    /// Parses the text format. Declared spacings must match the box and
    /// counts to 1e−9 relative.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        let mut tok = header.split_whitespace();
        let dim: usize = parse_num(tok.next(), "dim")?;
        if dim == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        let h: Vec<f64> = (0..dim)
            .map(|_| parse_num(tok.next(), "spacing"))
            .collect::<Result<_>>()?;
        let counts: Vec<usize> = (0..dim)
            .map(|_| parse_num(tok.next(), "count"))
            .collect::<Result<_>>()?;
        let bounds: Vec<(f64, f64)> = (0..dim)
            .map(|_| Ok((parse_num(tok.next(), "bound")?, parse_num(tok.next(), "bound")?)))
            .collect::<Result<_>>()?;
        if tok.next().is_some() {
            return Err(Error::Parse("trailing tokens in header".into()));
        }
        let values: Vec<f64> = lines
            .map(|l| {
                l.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad sample `{}`", l.trim())))
            })
            .collect::<Result<_>>()?;
        let grid = GridFunction::from_values(&bounds, &counts, values)?;
        for (declared, actual) in h.iter().zip(grid.spacing()) {
            if (declared - actual).abs() > 1e-9 * actual.abs() {
                return Err(Error::Parse(format!(
                    "declared spacing {declared} inconsistent with box (expected {actual})"
                )));
            }
        }
        Ok(grid)
    }

    pub fn to_json(&self) -> GridJson {
        GridJson::from(self)
    }
}
