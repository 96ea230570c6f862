//! Manifests and the delimited tables written by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use qnlode_core::analysis::{DiagnosticsSeries, SweepRow};
use qnlode_core::quantum::{MeasurementMode, QuantumState};
use qnlode_core::trajectory::{ClassicalSample, TrajectoryResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
const HASH_PREFIX: &str = "# manifest_sha256=";
/// Norm deviation accepted when reading stored states back.
const STORED_NORM_TOL: f64 = 1e-8;

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub run: Option<RunConfig>,
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub x0: Vec<f64>,
    pub c: f64,
    pub q: usize,
    pub dt: f64,
    pub t_final: f64,
    pub ensemble_size: usize,
    pub mode: MeasurementMode,
    /// Measurement rate; `m = s * dt` when given.
    pub s: Option<f64>,
    pub m: f64,
    pub seed: u64,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn hash(role: &str, path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            role: role.to_string(),
            path: fs::canonicalize(path).map_err(|e| CliError::io(path, e))?,
            sha256: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: invalid manifest: {e}", path.display())))
    }

    pub fn input(&self, role: &str) -> Option<&InputFile> {
        self.inputs.iter().find(|i| i.role == role)
    }

    pub fn write(&self, dir: &Path) -> Result<String, CliError> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_json() + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(self.hash())
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn table(path: &Path, hash: &str, header: &[String], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut text = format!("{HASH_PREFIX}{hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut text);
        let io = |e: csv::Error| CliError::Pipeline(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_trajectory(path: &Path, hash: &str, run: &TrajectoryResult) -> Result<(), CliError> {
    let n = run.classical.first().map_or(0, |c| c.x.len());
    let d = run.states.first().map_or(0, QuantumState::dim);
    let mut header: Vec<String> = ["step", "t_prime", "t_physical"].map(String::from).to_vec();
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("norm".into());
    header.extend((0..d).map(|i| format!("re{i}")));
    header.extend((0..d).map(|i| format!("im{i}")));
    let rows = run
        .classical
        .iter()
        .zip(&run.states)
        .map(|(c, s)| {
            let mut r = vec![c.step.to_string(), c.t_prime.to_string(), c.t_physical.to_string()];
            r.extend(c.x.iter().map(f64::to_string));
            r.push(c.norm.to_string());
            r.extend(s.amplitudes().iter().map(|z| z.re.to_string()));
            r.extend(s.amplitudes().iter().map(|z| z.im.to_string()));
            r
        })
        .collect();
    table(path, hash, &header, rows)
}

pub fn write_diagnostics(path: &Path, hash: &str, d: &DiagnosticsSeries) -> Result<(), CliError> {
    let header = ["t_prime", "entropy", "trace_distance"].map(String::from);
    let rows = d
        .times
        .iter()
        .zip(&d.entropy)
        .zip(&d.trace_distance)
        .map(|((t, s), e)| vec![t.to_string(), s.to_string(), e.to_string()])
        .collect();
    table(path, hash, &header, rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep(path: &Path, hash: &str, rows: &[SweepRow]) -> Result<(), CliError> {
    let header = ["s", "branch_time", "failures", "correlation"].map(String::from);
    let rows = rows
        .iter()
        .map(|r| vec![r.s.to_string(), opt(r.branch_time), r.failures.to_string(), opt(r.correlation)])
        .collect();
    table(path, hash, &header, rows)
}

pub fn write_failures(path: &Path, hash: &str, failures: &[(usize, u64, String)]) -> Result<(), CliError> {
    let header = ["member", "seed", "error"].map(String::from);
    let rows = failures
        .iter()
        .map(|(k, seed, e)| vec![k.to_string(), seed.to_string(), e.clone()])
        .collect();
    table(path, hash, &header, rows)
}

/// Reads a file written by [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> Result<TrajectoryResult, CliError> {
    let bad = |msg: String| CliError::Pipeline(format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let d = header.iter().filter(|h| h.starts_with("re")).count();
    if header.len() != 4 + n + 2 * d || d == 0 {
        return Err(bad("not a trajectory table".into()));
    }
    let mut out = TrajectoryResult {
        states: Vec::new(),
        classical: Vec::new(),
        seed: 0,
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
        let amps = DVector::from_iterator(
            d,
            (0..d).map(|i| Complex64::new(vals[4 + n + i], vals[4 + n + d + i])),
        );
        if (amps.norm() - 1.0).abs() > STORED_NORM_TOL {
            return Err(bad(format!("row {}: state norm {} differs from 1", line + 1, amps.norm())));
        }
        let state = QuantumState::normalized(amps);
        out.states.push(state);
        out.classical.push(ClassicalSample {
            step: vals[0] as usize,
            t_prime: vals[1],
            t_physical: vals[2],
            x: vals[3..3 + n].to_vec(),
            norm: vals[3 + n],
        });
    }
    if out.states.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(out)
}

/// `trajectory_*.csv` files in `dir`, sorted by name.
pub fn trajectory_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trajectory_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}
