//! CSV and JSON writers.
//!
//! Floats are written in Rust's shortest round-trip form, so parsing an
//! emitted value gives back the same `f64`. Files are written to a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use repump_core::pump::PumpDistribution;
use repump_core::ScatteringKernel;
use serde::Serialize;

use crate::error::Result;

/// Shortest decimal that parses back to `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `path` with its extension replaced by `.json`, or `.json` appended when
/// it has none or already ends in `.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | None => {
            let mut s = path.as_os_str().to_owned();
            s.push(".json");
            PathBuf::from(s)
        }
        Some(_) => path.with_extension("json"),
    }
}

/// Builds CSV text from a header and rows of preformatted cells.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Kernel as CSV: header `s,0,1,…,n_max`, then one row per final level.
pub fn kernel_csv(k: &ScatteringKernel) -> String {
    let dim = k.dim();
    let mut out = String::with_capacity(dim * dim * 24);
    out.push('s');
    for n in 0..dim {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for s in 0..dim {
        let _ = write!(out, "{s}");
        for v in k.matrix().row(s) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

/// Metadata written next to an exported kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMeta {
    pub eta: f64,
    pub n_max: usize,
    pub quad_order: usize,
    pub max_leakage: f64,
}

impl KernelMeta {
    pub fn of(k: &ScatteringKernel) -> Self {
        Self {
            eta: k.eta(),
            n_max: k.n_max(),
            quad_order: k.quad_order(),
            max_leakage: k.max_leakage(),
        }
    }
}

/// Kernel metadata plus the matrix, row by row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelJson {
    #[serde(flatten)]
    pub meta: KernelMeta,
    pub rows: Vec<Vec<f64>>,
}

/// Distribution as CSV with columns `s,probability`.
pub fn distribution_csv(d: &PumpDistribution) -> String {
    csv_text(
        &["s", "probability"],
        d.probs
            .iter()
            .enumerate()
            .map(|(s, p)| [s.to_string(), fmt_f64(*p)]),
    )
}

/// Metadata of an exported distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionMeta {
    pub eta: f64,
    pub p_e: f64,
    pub n0: usize,
    pub n_max: usize,
    pub leakage: f64,
    pub method: &'static str,
    #[serde(rename = "delta_E")]
    pub delta_e: f64,
    #[serde(rename = "sigma2_E")]
    pub sigma2_e: f64,
}

impl DistributionMeta {
    pub fn of(d: &PumpDistribution) -> Self {
        let (delta_e, sigma2_e) = d.raw_moments();
        Self {
            eta: d.params.eta,
            p_e: d.params.p_e,
            n0: d.params.n0,
            n_max: d.n_max(),
            leakage: d.leakage,
            method: d.method.as_str(),
            delta_e,
            sigma2_e,
        }
    }
}

/// Distribution metadata plus the probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionJson {
    #[serde(flatten)]
    pub meta: DistributionMeta,
    pub probabilities: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            1e-300,
            6.02e23,
            0.0,
            -2.5e-7,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(
            sidecar_path(Path::new("a/k.csv")),
            PathBuf::from("a/k.json")
        );
        assert_eq!(sidecar_path(Path::new("k")), PathBuf::from("k.json"));
        assert_eq!(
            sidecar_path(Path::new("k.json")),
            PathBuf::from("k.json.json")
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_uses_lf() {
        let t = csv_text(&["a", "b"], [["1".to_string(), "2".to_string()]]);
        assert_eq!(t, "a,b\n1,2\n");
    }
}
