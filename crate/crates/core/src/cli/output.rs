//! Artifact writers: trace and series CSV, JSON reports and the run
//! manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::ExperimentReport;
use crate::instrumentation::TheoryTrace;
use crate::rng::{RNG_ALGORITHM, RNG_VERSION};

pub const TRACE_COLUMNS: [&str; 16] = [
    "t",
    "f_w",
    "grad_norm_sq",
    "f_u",
    "eta_t",
    "beta2_t",
    "min_margin_prop2",
    "sum_eta_v",
    "S_total",
    "sigma_v",
    "delta_sum",
    "zeta_sum",
    "fhat",
    "lambda_phi4",
    "pi_hat",
    "m1",
];

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Trace rows for every step, or only the steps in `only` when given.
pub fn trace_csv(trace: &TheoryTrace, only: Option<&[u64]>) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for r in &trace.records {
        if only.is_some_and(|cps| cps.binary_search(&r.t).is_err()) {
            continue;
        }
        let vals = [
            r.f_w,
            r.grad_norm_sq,
            r.f_u,
            r.eta_t,
            r.beta2_t,
            r.min_margin_prop2,
            r.sum_eta_v,
            r.s_total,
            r.sigma_v,
            r.delta_sum,
            r.zeta_sum,
            r.fhat,
            r.lambda_phi4,
            r.pi_hat,
            r.m1,
        ];
        let _ = write!(out, "{}", r.t);
        for v in vals {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

/// Long-format summary series: one row per (series, checkpoint).
pub fn series_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("series,t,mean,median,q10,q90,min,max\n");
    for s in &report.series {
        for p in &s.points {
            let m = &p.summary;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.name,
                p.t,
                fmt_f64(m.mean),
                fmt_f64(m.median),
                fmt_f64(m.q10),
                fmt_f64(m.q90),
                fmt_f64(m.min),
                fmt_f64(m.max)
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Flat-format echo of the effective config.
    pub config: String,
    pub code_version: String,
    pub rng_algorithm: String,
    pub rng_version: u32,
    /// Milliseconds since the Unix epoch.
    pub started_unix_ms: u128,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Collects artifacts in one output directory and writes the manifest
/// after everything else.
pub struct OutputDir {
    root: PathBuf,
    manifest: RunManifest,
}

impl OutputDir {
    /// Creates the directory and confirms it is writable before any work
    /// is done.
    pub fn create(root: &Path, command: &str, config: String) -> Result<OutputDir> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let probe = root.join(".write-test");
        fs::write(&probe, b"").map_err(|e| io_err(&probe, e))?;
        fs::remove_file(&probe).map_err(|e| io_err(&probe, e))?;
        let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        Ok(OutputDir {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.into(),
                config,
                code_version: env!("CARGO_PKG_VERSION").into(),
                rng_algorithm: RNG_ALGORITHM.into(),
                rng_version: RNG_VERSION,
                started_unix_ms,
                artifacts: Vec::new(),
            },
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.manifest.artifacts.push(Artifact {
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<RunManifest> {
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(self.manifest)
    }
}
