//! Optional TOML configuration and the merged run settings.
//!
//! Precedence is flag, then config file, then built-in default.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::error::{LabError, Result};

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Comma-separated values with a header row.
    Csv,
    /// JSON with a fixed key order.
    Json,
}

/// Keys accepted in a `--config` file. All are optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub eta: Option<f64>,
    pub pe: Option<f64>,
    pub n0: Option<usize>,
    pub nmax: Option<usize>,
    pub quad: Option<usize>,
    pub seed: Option<u64>,
    pub traj: Option<u64>,
    pub gamma_ratio: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
    /// Lamb-Dicke parameters of the sweep.
    pub etas: Option<Vec<f64>>,
    /// `start:stop:step` grid of the sweep.
    pub pe_grid: Option<String>,
}

impl FileConfig {
    /// Reads and parses `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| LabError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Parses TOML text.
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Values shared by several subcommands after merging.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub eta: f64,
    pub pe: f64,
    pub n0: usize,
    pub nmax: Option<usize>,
    pub quad: usize,
    pub seed: u64,
    pub traj: u64,
    pub gamma_ratio: f64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
    pub etas: Option<Vec<f64>>,
    pub pe_grid: Option<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            eta: 0.1,
            pe: 0.0,
            n0: 0,
            nmax: None,
            quad: repump_core::fock::DEFAULT_QUAD_ORDER,
            seed: 1,
            traj: 10_000,
            gamma_ratio: repump_core::analytics::DEFAULT_GAMMA_E_OVER_NU,
            out: None,
            format: None,
            workers: None,
            etas: None,
            pe_grid: None,
        }
    }
}

impl Settings {
    /// Overlays the file values, then the flag values, on the defaults.
    pub fn merge(file: FileConfig, flags: FileConfig) -> Self {
        let d = Self::default();
        Self {
            eta: flags.eta.or(file.eta).unwrap_or(d.eta),
            pe: flags.pe.or(file.pe).unwrap_or(d.pe),
            n0: flags.n0.or(file.n0).unwrap_or(d.n0),
            nmax: flags.nmax.or(file.nmax),
            quad: flags.quad.or(file.quad).unwrap_or(d.quad),
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            traj: flags.traj.or(file.traj).unwrap_or(d.traj),
            gamma_ratio: flags
                .gamma_ratio
                .or(file.gamma_ratio)
                .unwrap_or(d.gamma_ratio),
            out: flags.out.or(file.out),
            format: flags.format.or(file.format),
            workers: flags.workers.or(file.workers),
            etas: flags.etas.or(file.etas),
            pe_grid: flags.pe_grid.or(file.pe_grid),
        }
    }
}
