//! CSV files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use hopsim_core::{CurveTable, Point};

use crate::CliError;

/// Fixed scientific notation with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects CSV files written into one output directory.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<OutputEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut text = String::with_capacity(64 * (rows.len() + 1));
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        let path = self.dir.join(name);
        fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(OutputEntry {
            file: name.to_string(),
            bytes: text.len(),
            sha256: hex_digest(text.as_bytes()),
        });
        Ok(())
    }

    pub fn write_points(&mut self, name: &str, points: &[Point]) -> Result<(), CliError> {
        let rows: Vec<String> = points
            .iter()
            .map(|p| format!("{},{}", num(p.re), num(p.im)))
            .collect();
        self.write_csv(name, "x,y", &rows)
    }

    pub fn finish(self, manifest: Manifest) -> Result<(), CliError> {
        let manifest = Manifest {
            outputs: self.written,
            ..manifest
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub command_line: Vec<String>,
    pub master_seed: u64,
    /// Resolved configuration in the `key = value` file format.
    pub config: String,
    /// Settings that are not part of the configuration file.
    pub run: serde_json::Value,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub outputs: Vec<OutputEntry>,
}

pub fn ccdf_rows(table: &CurveTable) -> Vec<String> {
    table
        .rows
        .iter()
        .map(|r| format!("{},{},{}", num(r.x), num(r.y), num(r.stderr)))
        .collect()
}

/// One row per `(lambda_bs, beta)`, ordered by density then threshold.
pub fn ase_rows(curves: &[CurveTable]) -> Vec<String> {
    let mut rows = Vec::new();
    let n = curves.first().map_or(0, |c| c.rows.len());
    for i in 0..n {
        for c in curves {
            let beta = c.fixed.as_ref().map_or(f64::NAN, |f| f.1);
            let r = c.rows[i];
            rows.push(format!(
                "{},{},{},{}",
                num(r.x),
                num(beta),
                num(r.y),
                num(r.stderr)
            ));
        }
    }
    rows
}
