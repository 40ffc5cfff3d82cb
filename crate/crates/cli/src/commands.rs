use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use slag_core::families::{FamilyRegistry, ResidualReport, VerifyOptions};
use slag_core::gridfn::GridFunction;
use slag_core::harnack::{self, BallChain, ChainInvariants, Polyline};
use slag_core::{legendre, rotation, Error, PhaseParams};

use crate::output::to_json;

/// A check ran to completion and did not pass.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "check failed: {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn emit(text: &str, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_grid(path: &Path) -> anyhow::Result<GridFunction> {
    Ok(GridFunction::from_text(&read(path)?)?)
}

#[derive(Serialize)]
struct PhaseOut {
    #[serde(flatten)]
    params: PhaseParams,
    rotated_phase: f64,
}

pub fn phase(n: usize, theta: f64) -> anyhow::Result<()> {
    let params = PhaseParams::derive(n, theta)?;
    let out = PhaseOut {
        rotated_phase: params.rotated_phase(),
        params,
    };
    emit(&(to_json(&out, true)? + "\n"), None)
}

#[derive(Serialize)]
struct ReportLine<'a> {
    family: &'a str,
    #[serde(flatten)]
    report: &'a ResidualReport,
    passed: bool,
}

pub fn verify(spec: &str, probes: usize, seed: u64, fd_step: f64) -> anyhow::Result<()> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        read(Path::new(spec))?
    };
    let family = FamilyRegistry::with_defaults().build_json(&text)?;
    let opts = VerifyOptions {
        probes,
        seed,
        fd_step,
    };
    let reports = family.verify(&opts)?;
    let mut text = String::new();
    for r in &reports {
        let line = ReportLine {
            family: family.name(),
            report: r,
            passed: r.passed(),
        };
        text.push_str(&to_json(&line, false)?);
        text.push('\n');
    }
    emit(&text, None)?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.equation.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CheckFailed(failed.join("; ")).into());
    }
    Ok(())
}

fn parse_m_range(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidInput(format!("M range {spec:?} must look like a:b"));
    let (a, b) = match spec.split_once(':') {
        Some((a, b)) => (a.trim().parse::<i64>().map_err(|_| bad())?, b.trim().parse::<i64>().map_err(|_| bad())?),
        None => {
            let v = spec.trim().parse::<i64>().map_err(|_| bad())?;
            (v, v)
        }
    };
    if a > b {
        return Err(Error::InvalidInput(format!("M range {spec:?} is empty")));
    }
    Ok((a..=b).map(|m| m as f64).collect())
}

pub fn sweep(m: &str, theta: f64, n: usize, r: f64, output: Option<&Path>) -> anyhow::Result<()> {
    let ms = parse_m_range(m)?;
    let opts = harnack::SweepOptions {
        r,
        ..Default::default()
    };
    let records = harnack::estimate_sweep_with(&ms, theta, n, &opts)?;
    let mut csv = Vec::new();
    harnack::write_csv(&records, &mut csv)?;
    emit(std::str::from_utf8(&csv)?, output)?;
    let max_ratio = records.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    eprintln!(
        "max ratio {}",
        slag_core::numfmt::format_significant(max_ratio, 10)
    );
    if max_ratio > 1.0 {
        return Err(CheckFailed(format!("max ratio {max_ratio} exceeds 1")).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct ChainOut<'a> {
    k: usize,
    #[serde(flatten)]
    chain: &'a BallChain,
    invariants: &'a ChainInvariants,
}

fn parse_curve(text: &str) -> anyhow::Result<Polyline> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let vertices = match v {
        Value::Object(mut map) => map
            .remove("vertices")
            .ok_or_else(|| Error::Parse("curve object needs a \"vertices\" field".into()))?,
        other => other,
    };
    let vertices: Vec<Vec<f64>> =
        serde_json::from_value(vertices).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(Polyline::new(vertices)?)
}

pub fn chain(curve: &Path, r: f64) -> anyhow::Result<()> {
    let poly = parse_curve(&read(curve)?)?;
    let chain = harnack::ball_chain(&poly, r)?;
    let inv = chain.check(&poly);
    let out = ChainOut {
        k: chain.k(),
        chain: &chain,
        invariants: &inv,
    };
    emit(&(to_json(&out, true)? + "\n"), None)?;
    if !inv.all_hold() {
        return Err(CheckFailed("ball chain invariants".into()).into());
    }
    Ok(())
}

pub fn rotate(
    grid: &Path,
    n: usize,
    theta: f64,
    k: Option<f64>,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let u = read_grid(grid)?;
    let params = PhaseParams::derive(n, theta)?;
    let k = k.unwrap_or_else(|| params.theta.tan());
    let graph = rotation::rotate_function(&u, &params, k)?;
    emit(&(to_json(&graph, true)? + "\n"), output)
}

#[derive(Serialize)]
struct InvolutionOut {
    sup_error: f64,
    h: f64,
}

pub fn legendre(
    grid: &Path,
    involution: bool,
    slopes: Option<&str>,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let f = read_grid(grid)?;
    if involution {
        let sup_error = legendre::involution_check(&f)?;
        let h = f.spacing().into_iter().fold(0.0, f64::max);
        return emit(&(to_json(&InvolutionOut { sup_error, h }, true)? + "\n"), output);
    }
    let spec = slopes.ok_or_else(|| Error::InvalidInput("pass --involution or --slopes lo:hi".into()))?;
    let bad = || Error::InvalidInput(format!("slope box {spec:?} must look like lo:hi"));
    let (lo, hi) = spec.split_once(':').ok_or_else(bad)?;
    let (lo, hi): (f64, f64) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
    let bounds = vec![(lo, hi); f.dim()];
    let counts = f.counts();
    let template = GridFunction::sample(&bounds, &counts, |_| 0.0)?;
    let queries: Vec<Vec<f64>> = (0..template.len()).map(|k| template.node(k)).collect();
    let star = legendre::conjugate(&f, &queries)?;
    let g = GridFunction::from_values(&bounds, &counts, star.values)?;
    emit(&g.to_text(), output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_ranges() {
        assert_eq!(parse_m_range("1:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_m_range("4").unwrap(), vec![4.0]);
        assert!(parse_m_range("3:1").is_err());
        assert!(parse_m_range("a:b").is_err());
    }
}
