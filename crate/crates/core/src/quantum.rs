//! State-vector emulation of one measure-and-evolve step.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::OHPair;

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-13;
/// Eigenvalues closer than this are measured as one outcome.
const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("observable is not Hermitian (asymmetry {0:e})")]
    NonHermitianObservable(f64),
    #[error("Hamiltonian is not Hermitian with imaginary entries (deviation {0:e})")]
    NonHermitianHamiltonian(f64),
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("measurement model needs m >= 1, got {0}")]
    BadShotCount(f64),
}

/// Unit-norm amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self, QuantumError> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL || norm.is_nan() {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self, QuantumError> {
        Self::new(DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&a| Complex64::new(a, 0.0)),
        ))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amplitudes: DVector<Complex64>) -> Self {
        let n = amplitudes.norm();
        Self {
            amplitudes: amplitudes / Complex64::new(n, 0.0),
        }
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn max_imag(&self) -> f64 {
        self.amplitudes.iter().fold(0.0, |m, a| m.max(a.im.abs()))
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.re).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMode {
    Exact,
    Shot,
    Gaussian,
}

impl std::str::FromStr for MeasurementMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "shot" => Ok(Self::Shot),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(format!("unknown measurement mode `{other}`")),
        }
    }
}

/// How expectation values are obtained each step.
///
/// `shots` is `m`, the number of measurements per observable per step. Shot
/// mode rounds it to an integer; the Gaussian model uses it as a real number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub mode: MeasurementMode,
    pub shots: f64,
    pub rng_seed: u64,
}

impl MeasurementModel {
    pub fn exact() -> Self {
        Self {
            mode: MeasurementMode::Exact,
            shots: f64::INFINITY,
            rng_seed: 0,
        }
    }

    pub fn shot(m: u64, rng_seed: u64) -> Self {
        Self {
            mode: MeasurementMode::Shot,
            shots: m as f64,
            rng_seed,
        }
    }

    pub fn gaussian(m: f64, rng_seed: u64) -> Self {
        Self {
            mode: MeasurementMode::Gaussian,
            shots: m,
            rng_seed,
        }
    }

    /// Model with `m` derived from a measurement rate `s` per unit time.
    pub fn from_rate(mode: MeasurementMode, s: f64, dt: f64, rng_seed: u64) -> Self {
        let m = s * dt;
        match mode {
            MeasurementMode::Exact => Self::exact(),
            MeasurementMode::Shot => Self::shot(m.round().max(1.0) as u64, rng_seed),
            MeasurementMode::Gaussian => Self::gaussian(m, rng_seed),
        }
    }

    pub fn validate(&self) -> Result<(), QuantumError> {
        match self.mode {
            MeasurementMode::Exact => Ok(()),
            _ if self.shots >= 1.0 && self.shots.is_finite() => Ok(()),
            _ => Err(QuantumError::BadShotCount(self.shots)),
        }
    }

    /// Measurements per unit time, `s = m / dt`.
    pub fn rate(&self, dt: f64) -> f64 {
        self.shots / dt
    }
}

/// Spectral decomposition grouped by distinct eigenvalue.
#[derive(Debug, Clone)]
struct Spectrum {
    outcomes: Vec<(f64, DMatrix<f64>)>,
}

/// Real symmetric observable with cached sparse form and spectrum.
#[derive(Debug)]
pub struct Observable {
    matrix: DMatrix<f64>,
    nonzeros: Vec<(usize, usize, f64)>,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for Observable {
    fn clone(&self) -> Self {
        Self {
            matrix: self.matrix.clone(),
            nonzeros: self.nonzeros.clone(),
            spectrum: self.spectrum.clone(),
        }
    }
}

impl Observable {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, QuantumError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QuantumError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > HERMITIAN_TOL {
            return Err(QuantumError::NonHermitianObservable(asym));
        }
        let n = matrix.nrows();
        let nonzeros = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let v = matrix[(r, c)];
                (v != 0.0).then_some((r, c, v))
            })
            .collect();
        Ok(Self {
            matrix,
            nonzeros,
            spectrum: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn check_dim(&self, state: &QuantumState) -> Result<(), QuantumError> {
        if state.dim() != self.dim() {
            return Err(QuantumError::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        Ok(())
    }

    fn mean(&self, psi: &DVector<Complex64>) -> f64 {
        self.nonzeros
            .iter()
            .map(|&(r, c, v)| v * (psi[r].conj() * psi[c]).re)
            .sum()
    }

    fn second_moment(&self, psi: &DVector<Complex64>) -> f64 {
        let mut o_psi = DVector::from_element(psi.len(), Complex64::new(0.0, 0.0));
        for &(r, c, v) in &self.nonzeros {
            o_psi[r] += psi[c] * v;
        }
        o_psi.norm_squared()
    }

    /// `<O^2> - <O>^2`, clamped at zero.
    pub fn variance(&self, state: &QuantumState) -> Result<f64, QuantumError> {
        self.check_dim(state)?;
        let psi = state.amplitudes();
        let mean = self.mean(psi);
        Ok((self.second_moment(psi) - mean * mean).max(0.0))
    }

    fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            let eig = SymmetricEigen::new(self.matrix.clone());
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let mut outcomes: Vec<(f64, Vec<usize>)> = Vec::new();
            for k in order {
                let lambda = eig.eigenvalues[k];
                match outcomes.last_mut() {
                    Some((value, cols)) if (lambda - *value).abs() <= DEGENERACY_TOL => cols.push(k),
                    _ => outcomes.push((lambda, vec![k])),
                }
            }
            Spectrum {
                outcomes: outcomes
                    .into_iter()
                    .map(|(lambda, cols)| (lambda, eig.eigenvectors.select_columns(cols.iter())))
                    .collect(),
            }
        })
    }

    /// Distinct eigenvalues and their Born probabilities in `state`.
    pub fn outcome_probabilities(&self, state: &QuantumState) -> Result<Vec<(f64, f64)>, QuantumError> {
        self.check_dim(state)?;
        let psi = state.amplitudes();
        Ok(self
            .spectrum()
            .outcomes
            .iter()
            .map(|(lambda, basis)| {
                let p: f64 = basis
                    .column_iter()
                    .map(|v| {
                        v.iter()
                            .zip(psi.iter())
                            .map(|(&a, &b)| b * a)
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .sum();
                (*lambda, p)
            })
            .collect())
    }
}

/// `<psi|O|psi>`.
pub fn expectation(state: &QuantumState, obs: &Observable) -> Result<f64, QuantumError> {
    obs.check_dim(state)?;
    Ok(obs.mean(state.amplitudes()))
}

/// Estimate of `<psi|O|psi>` under the measurement model.
///
/// Shot mode draws multinomial outcome counts over the distinct eigenvalues
/// of `O` and returns their sample mean. Gaussian mode draws from
/// `Normal(<O>, Var(O) / m)`. Values are not clamped to the spectral range.
pub fn sample_expectation<R: Rng + ?Sized>(
    state: &QuantumState,
    obs: &Observable,
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<f64, QuantumError> {
    model.validate()?;
    match model.mode {
        MeasurementMode::Exact => expectation(state, obs),
        MeasurementMode::Gaussian => {
            let var = obs.variance(state)?;
            let mean = obs.mean(state.amplitudes());
            if var == 0.0 {
                return Ok(mean);
            }
            let z: f64 = StandardNormal.sample(rng);
            Ok(mean + (var / model.shots).sqrt() * z)
        }
        MeasurementMode::Shot => {
            let m = model.shots.round() as u64;
            let probs = obs.outcome_probabilities(state)?;
            let mut remaining = m;
            let mut mass: f64 = probs.iter().map(|p| p.1).sum();
            let mut total = 0.0;
            let last = probs.len() - 1;
            for (k, &(lambda, p)) in probs.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                let count = if k == last {
                    remaining
                } else {
                    let frac = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
                    Binomial::new(remaining, frac)
                        .expect("valid binomial parameters")
                        .sample(rng)
                };
                total += lambda * count as f64;
                remaining -= count;
                mass -= p;
            }
            Ok(total / m as f64)
        }
    }
}

/// The constant Hamiltonian used for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHamiltonian {
    matrix: DMatrix<Complex64>,
    weights: Vec<f64>,
}

impl SnapshotHamiltonian {
    pub fn new(matrix: DMatrix<Complex64>, weights: Vec<f64>) -> Result<Self, QuantumError> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(QuantumError::DimensionMismatch {
                expected: n,
                got: matrix.ncols(),
            });
        }
        let scale = matrix.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let mut dev = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let z = matrix[(r, c)];
                dev = dev.max(z.re.abs()).max((z - matrix[(c, r)].conj()).norm());
            }
        }
        if dev > HERMITIAN_TOL * scale {
            return Err(QuantumError::NonHermitianHamiltonian(dev));
        }
        Ok(Self { matrix, weights })
    }

    /// Snapshot from a real antisymmetric generator `G = -i H`.
    pub fn from_generator(generator: &DMatrix<f64>, weights: Vec<f64>) -> Result<Self, QuantumError> {
        Self::new(generator.map(|g| Complex64::new(0.0, g)), weights)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `H = sum_k w_k H_k`.
pub fn assemble_hamiltonian(pairs: &[OHPair], weights: &[f64]) -> Result<SnapshotHamiltonian, QuantumError> {
    if pairs.len() != weights.len() {
        return Err(QuantumError::DimensionMismatch {
            expected: pairs.len(),
            got: weights.len(),
        });
    }
    let n = pairs.first().map(OHPair::dim).unwrap_or(0);
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (p, &w) in pairs.iter().zip(weights) {
        if p.dim() != n {
            return Err(QuantumError::DimensionMismatch {
                expected: n,
                got: p.dim(),
            });
        }
        h += &p.hamiltonian * Complex64::new(w, 0.0);
    }
    SnapshotHamiltonian::new(h, weights.to_vec())
}

/// `exp(-i H dt) |psi>` through the eigendecomposition of `H`.
pub fn unitary_step(
    state: &QuantumState,
    h: &SnapshotHamiltonian,
    dt: f64,
) -> Result<QuantumState, QuantumError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(QuantumError::BadTimeStep(dt));
    }
    if h.dim() != state.dim() {
        return Err(QuantumError::DimensionMismatch {
            expected: h.dim(),
            got: state.dim(),
        });
    }
    if h.matrix.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(state.clone());
    }
    let eig = SymmetricEigen::new(h.matrix.clone());
    let v = &eig.eigenvectors;
    let mut coeffs = v.adjoint() * state.amplitudes();
    for (c, &lambda) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= Complex64::from_polar(1.0, -lambda * dt);
    }
    Ok(QuantumState {
        amplitudes: v * coeffs,
    })
}
