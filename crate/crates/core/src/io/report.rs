//! CSV and JSON reports plus the per-run manifest.
//!
//! CSV columns:
//!
//! * `records.csv`: `t, reduced_norm, energy, flux, projection_residual, source_norm_sq`
//! * `energy.csv`: `t, energy, source_integral, margin`
//! * `support.csv`: `t, total, inside_cone, collar_only, outside, leakage`
//! * `spectrum.csv`: `component, mode, eigenvalue` (the interval has the single mode 0)
//! * `study.csv`: `level, radial, angular, dt, difference_l2, difference_max, order_l2, order_max`

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{ConvergenceReport, EnergyReport, SupportReport};
use crate::error::{Error, Result};

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("csv serialization failed: {other:?}")),
    }
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Data(format!("json serialization failed: {e}")))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub t: f64,
    pub energy: f64,
    pub source_integral: f64,
    pub margin: f64,
}

pub fn energy_rows(r: &EnergyReport) -> Vec<EnergyRow> {
    (0..r.times.len())
        .map(|i| EnergyRow { t: r.times[i], energy: r.energy[i], source_integral: r.source_integral[i], margin: r.margins[i] })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportRow {
    pub t: f64,
    pub total: f64,
    pub inside_cone: f64,
    pub collar_only: f64,
    pub outside: f64,
    pub leakage: f64,
}

pub fn support_rows(r: &SupportReport) -> Vec<SupportRow> {
    (0..r.times.len())
        .map(|i| SupportRow {
            t: r.times[i],
            total: r.total[i],
            inside_cone: r.inside_cone[i],
            collar_only: r.collar_only[i],
            outside: r.outside[i],
            leakage: r.leakage[i],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyRow {
    pub level: usize,
    pub radial: usize,
    pub angular: usize,
    pub dt: f64,
    /// Difference to the next level; empty on the finest.
    pub difference_l2: Option<f64>,
    pub difference_max: Option<f64>,
    /// Order from this level and the next two; empty on the last two.
    pub order_l2: Option<f64>,
    pub order_max: Option<f64>,
}

pub fn study_rows(r: &ConvergenceReport) -> Vec<StudyRow> {
    r.resolutions
        .iter()
        .enumerate()
        .map(|(i, res)| StudyRow {
            level: i,
            radial: res.radial,
            angular: res.angular,
            dt: res.dt,
            difference_l2: r.differences_l2.get(i).copied(),
            difference_max: r.differences_max.get(i).copied(),
            order_l2: r.orders_l2.get(i).copied(),
            order_max: r.orders_max.get(i).copied(),
        })
        .collect()
}

/// A checked quantity and its pass/fail status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Assertion {
    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Assertion { name: name.into(), value, limit, passed: value <= limit }
    }

    /// Passes when `value >= limit`.
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Assertion { name: name.into(), value, limit, passed: value >= limit }
    }
}

/// Everything needed to reproduce a run directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub serial: bool,
    /// SHA-256 of `config_text`.
    pub config_sha256: String,
    /// The config file exactly as read.
    pub config_text: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_text: &str, seed: u64, serial: bool) -> Self {
        Manifest {
            tool: "aps-dirac".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            serial,
            config_sha256: sha256_hex(config_text.as_bytes()),
            config_text: config_text.into(),
            files: Vec::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [EnergyRow { t: 0.0, energy: 1.0, source_integral: 0.0, margin: 0.0 }];
        write_csv(dir.path().join("e.csv"), rows).unwrap();
        let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
        assert_eq!(text, "t,energy,source_integral,margin\n0.0,1.0,0.0,0.0\n");
        let m = Manifest::new("solve", "x = 1\n", 7, true);
        write_json(dir.path().join("m.json"), &m).unwrap();
        let back: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(back["config_text"], "x = 1\n");
        assert_eq!(back["seed"], 7);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn assertion_directions() {
        assert!(Assertion::at_most("a", 1.0, 1.0).passed);
        assert!(!Assertion::at_most("a", 1.1, 1.0).passed);
        assert!(Assertion::at_least("b", 2.0, 1.8).passed);
        assert!(!Assertion::at_least("b", f64::NAN, 1.8).passed);
    }
}
