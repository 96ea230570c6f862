//! Serialized output of the mapping pipeline.
//!
//! The artifact is a JSON document listing the observable–Hamiltonian pairs
//! as dense row-major matrices (Hamiltonians split into real and imaginary
//! parts) together with the dimensions and options needed to encode and
//! decode states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mapping::{MapOptions, MappedSystem, OHPair};
use crate::poly::PolynomialSystem;

pub const ARTIFACT_FORMAT: &str = "qnlode-artifact/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported artifact format {0:?}")]
    Format(String),
    #[error("pair {index}: {message}")]
    Pair { index: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub label: Vec<(usize, usize)>,
    pub observable: RealMatrix,
    pub hamiltonian: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub system_sha256: String,
    pub target_degree: usize,
    pub merge_pairs: bool,
    pub raw_pair_count: usize,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineArtifact {
    pub format: String,
    /// Variables of the homogenized system, including `x0`.
    pub base_dim: usize,
    pub group_size: usize,
    /// Homogeneous degree before norm preservation.
    pub q: usize,
    pub c: f64,
    pub original_n_vars: usize,
    pub grouped_dim: usize,
    pub state_dim: usize,
    pub pairs: Vec<PairRecord>,
    pub provenance: Provenance,
}

fn real_record(m: &DMatrix<f64>) -> RealMatrix {
    RealMatrix {
        rows: m.nrows(),
        cols: m.ncols(),
        data: m.transpose().iter().copied().collect(),
    }
}

fn complex_record(m: &DMatrix<Complex64>) -> ComplexMatrix {
    let t = m.transpose();
    ComplexMatrix {
        rows: m.nrows(),
        cols: m.ncols(),
        re: t.iter().map(|z| z.re).collect(),
        im: t.iter().map(|z| z.im).collect(),
    }
}

impl PipelineArtifact {
    pub fn new(sys: &PolynomialSystem, mapped: &MappedSystem, opts: &MapOptions) -> Self {
        Self {
            format: ARTIFACT_FORMAT.to_string(),
            base_dim: mapped.reduced.base_dim(),
            group_size: mapped.reduced.group_size(),
            q: mapped.source_degree(),
            c: mapped.record.c,
            original_n_vars: mapped.record.original_n_vars,
            grouped_dim: mapped.reduced.grouped_dim(),
            state_dim: mapped.state_dim(),
            pairs: mapped
                .pairs
                .iter()
                .map(|p| PairRecord {
                    label: p.label.clone(),
                    observable: real_record(&p.observable),
                    hamiltonian: complex_record(&p.hamiltonian),
                })
                .collect(),
            provenance: Provenance {
                system_sha256: sys.content_hash(),
                target_degree: mapped.record.target_degree,
                merge_pairs: opts.merge_pairs,
                raw_pair_count: mapped.raw_pairs.len(),
                tool_version: TOOL_VERSION.to_string(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let a: Self = serde_json::from_str(text)?;
        if a.format != ARTIFACT_FORMAT {
            return Err(ArtifactError::Format(a.format));
        }
        a.pairs()?;
        Ok(a)
    }

    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Rebuilds and validates the pairs.
    pub fn pairs(&self) -> Result<Vec<OHPair>, ArtifactError> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(index, p)| {
                let err = |message: String| ArtifactError::Pair { index, message };
                let n = self.state_dim;
                let (o, h) = (&p.observable, &p.hamiltonian);
                if o.rows != n || o.cols != n || o.data.len() != n * n {
                    return Err(err(format!("observable must be {n}x{n}")));
                }
                if h.rows != n || h.cols != n || h.re.len() != n * n || h.im.len() != n * n {
                    return Err(err(format!("Hamiltonian must be {n}x{n}")));
                }
                let obs = DMatrix::from_row_slice(n, n, &o.data);
                let ham = DMatrix::from_fn(n, n, |r, c| {
                    Complex64::new(h.re[r * n + c], h.im[r * n + c])
                });
                OHPair::new(obs, ham, p.label.clone()).map_err(err)
            })
            .collect()
    }

    pub fn qubits(&self) -> usize {
        self.state_dim.trailing_zeros() as usize
    }
}
