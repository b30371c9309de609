//! Parameter grids for the variance sweep.

use repump_core::analytics::variance_closed_form;
use repump_core::SchemeParams;
use serde::Serialize;

use crate::error::{LabError, Result};

/// Default Lamb-Dicke parameters of the sweep.
pub const DEFAULT_ETAS: [f64; 3] = [0.1, 0.3, 0.6];
/// Default return-probability grid.
pub const DEFAULT_PE_GRID: &str = "0:0.95:0.05";

/// Grid of the variance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub etas: Vec<f64>,
    pub p_e: Vec<f64>,
    pub n0: usize,
}

/// Parses `start:stop:step` into the inclusive grid, each point rounded to
/// twelve decimals so `0.05 * 3` prints as `0.15`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| LabError::Usage(format!("p_e grid {spec:?}: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected start:stop:step"));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step.is_finite() && step > 0.0) {
        return Err(bad("step must be > 0"));
    }
    if !(start >= 0.0 && stop < 1.0) {
        return Err(bad("points must lie in [0, 1)"));
    }
    if stop < start {
        return Err(bad("empty grid"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Parses a comma-separated list of Lamb-Dicke parameters.
pub fn parse_etas(list: &str) -> Result<Vec<f64>> {
    let etas = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| LabError::Usage(format!("bad eta {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(etas)
}

impl SweepSpec {
    pub fn new(etas: Vec<f64>, p_e: Vec<f64>, n0: usize) -> Result<Self> {
        if etas.is_empty() || p_e.is_empty() {
            return Err(LabError::Usage("sweep grids must be non-empty".into()));
        }
        if let Some(e) = etas.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(LabError::Usage(format!("eta {e} must be finite and >= 0")));
        }
        if let Some(p) = p_e.iter().find(|p| !(**p >= 0.0 && **p < 1.0)) {
            return Err(LabError::Usage(format!("p_e {p} outside [0, 1)")));
        }
        Ok(Self { etas, p_e, n0 })
    }

    /// One row per `(η, p_e)`, η outermost.
    pub fn rows(&self) -> Result<Vec<SweepRow>> {
        let mut rows = Vec::with_capacity(self.etas.len() * self.p_e.len());
        for &eta in &self.etas {
            for &p_e in &self.p_e {
                let v = variance_closed_form(&SchemeParams::new(eta, p_e, self.n0)?)?;
                rows.push(SweepRow {
                    eta,
                    p_e,
                    sigma2_total: v.total,
                    sigma2_first_term: v.first_term,
                });
            }
        }
        Ok(rows)
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub p_e: f64,
    pub sigma2_total: f64,
    pub sigma2_first_term: f64,
}
