//! Ensemble diagnostics: density matrices, entropy, trace distance and
//! branching detection.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{MeasurementModel, QuantumState};
use crate::trajectory::{run_ensemble, run_trajectory, SimulationConfig, SimulationError, Simulator, TrajectoryResult};

pub const DEFAULT_BRANCH_THRESHOLD: f64 = 0.1;
/// Negative eigenvalues down to this size are rounding noise.
pub const CLAMP_TOL: f64 = 1e-12;
/// Eigenvalues below this indicate an invalid density matrix.
pub const NEGATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty ensemble")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid density matrix: {0}")]
    Invalid(String),
    #[error("eigenvalue {0:e} is negative beyond tolerance")]
    NegativeEigenvalue(f64),
    #[error("recording grids differ: {0}")]
    GridMismatch(String),
    #[error("every trajectory failed; first error: {0}")]
    AllFailed(SimulationError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
    /// Built from copies of a single state.
    pure: bool,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and positivity.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self, AnalysisError> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(AnalysisError::DimensionMismatch {
                expected: n,
                got: matrix.ncols(),
            });
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(AnalysisError::Invalid(format!("trace {tr}")));
        }
        let asym = (&matrix - matrix.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if asym > 1e-13 {
            return Err(AnalysisError::Invalid(format!("not Hermitian ({asym:e})")));
        }
        let rho = Self { matrix, pure: false };
        let min = rho.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -CLAMP_TOL {
            return Err(AnalysisError::NegativeEigenvalue(min));
        }
        Ok(rho)
    }

    /// `rho = (1/K) sum_j |psi_j><psi_j|`.
    pub fn from_states(states: &[QuantumState]) -> Result<Self, AnalysisError> {
        let first = states.first().ok_or(AnalysisError::Empty)?;
        let n = first.dim();
        if let Some(s) = states.iter().find(|s| s.dim() != n) {
            return Err(AnalysisError::DimensionMismatch {
                expected: n,
                got: s.dim(),
            });
        }
        let pure = states.iter().all(|s| s == first);
        let members = if pure { &states[..1] } else { states };
        let mut rho = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for s in members {
            let a = s.amplitudes();
            rho += a * a.adjoint();
        }
        rho /= Complex64::new(members.len() as f64, 0.0);
        // exact Hermitian symmetry for the eigensolver
        let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(Self { matrix: rho, pure })
    }

    pub fn pure(state: &QuantumState) -> Self {
        Self::from_states(std::slice::from_ref(state)).expect("one state")
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_pure(&self) -> bool {
        self.pure
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// `-sum lambda ln lambda`, natural log.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64, AnalysisError> {
    if rho.pure {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for lambda in rho.eigenvalues() {
        if lambda < -NEGATIVE_TOL {
            return Err(AnalysisError::NegativeEigenvalue(lambda));
        }
        if lambda > 0.0 {
            s -= lambda * lambda.ln();
        }
    }
    Ok(s.max(0.0))
}

/// `(1/2) sum |mu_i|` over eigenvalues of `rho1 - rho2`.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64, AnalysisError> {
    if rho1.dim() != rho2.dim() {
        return Err(AnalysisError::DimensionMismatch {
            expected: rho1.dim(),
            got: rho2.dim(),
        });
    }
    let diff = rho1.matrix() - rho2.matrix();
    let diff = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(diff);
    Ok((0.5 * eig.eigenvalues.iter().map(|m| m.abs()).sum::<f64>()).min(1.0))
}

/// Entropy and trace distance on the recording grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub trace_distance: Vec<f64>,
    pub branch_time: Option<f64>,
    pub threshold_fraction: f64,
    /// `N ln 2` for `N` qubits.
    pub max_entropy: f64,
}

impl DiagnosticsSeries {
    /// Pearson correlation of entropy against trace distance.
    pub fn entropy_error_correlation(&self) -> Option<f64> {
        pearson(&self.entropy, &self.trace_distance)
    }
}

/// `N ln 2` for a state of dimension `2^N`.
pub fn max_entropy(state_dim: usize) -> f64 {
    (state_dim as f64).log2() * std::f64::consts::LN_2
}

/// First time with `entropy >= fraction * max_entropy`, no interpolation.
pub fn branch_time(times: &[f64], entropy: &[f64], fraction: f64, max_entropy: f64) -> Option<f64> {
    let level = fraction * max_entropy;
    times.iter().zip(entropy).find(|(_, &s)| s >= level).map(|(&t, _)| t)
}

/// Compares an ensemble against the pure deterministic state at each snapshot.
pub fn diagnostics(
    ensemble: &[TrajectoryResult],
    deterministic: &TrajectoryResult,
    threshold_fraction: f64,
) -> Result<DiagnosticsSeries, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = deterministic.len();
    for (k, member) in ensemble.iter().enumerate() {
        if member.len() != n {
            return Err(AnalysisError::GridMismatch(format!(
                "member {k} has {} snapshots, deterministic run has {n}",
                member.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| member.classical[i].step != deterministic.classical[i].step) {
            return Err(AnalysisError::GridMismatch(format!(
                "member {k} snapshot {i} is step {}, expected {}",
                member.classical[i].step, deterministic.classical[i].step
            )));
        }
    }
    let dim = deterministic.states.first().ok_or(AnalysisError::Empty)?.dim();
    let smax = max_entropy(dim);
    let mut times = Vec::with_capacity(n);
    let mut entropy = Vec::with_capacity(n);
    let mut distance = Vec::with_capacity(n);
    let mut snapshot = Vec::with_capacity(ensemble.len());
    for i in 0..n {
        snapshot.clear();
        snapshot.extend(ensemble.iter().map(|m| m.states[i].clone()));
        let rho = DensityMatrix::from_states(&snapshot)?;
        let det = DensityMatrix::pure(&deterministic.states[i]);
        times.push(deterministic.classical[i].t_prime);
        entropy.push(von_neumann_entropy(&rho)?);
        distance.push(trace_distance(&rho, &det)?);
    }
    let branch = branch_time(&times, &entropy, threshold_fraction, smax);
    Ok(DiagnosticsSeries {
        times,
        entropy,
        trace_distance: distance,
        branch_time: branch,
        threshold_fraction,
        max_entropy: smax,
    })
}

/// Sample Pearson correlation; `None` for short or constant series.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    /// `None` when the entropy never crossed the threshold.
    pub branch_time: Option<f64>,
    pub failures: usize,
    pub correlation: Option<f64>,
}

/// Branch time per measurement rate `s`.
///
/// `template` supplies `dt`, `t_final`, ensemble size and the measurement
/// mode; its `m` is replaced by `s * dt` for each row.
pub fn branch_scaling_sweep(
    sim: &Simulator,
    x0: &[f64],
    s_values: &[f64],
    template: &SimulationConfig,
    base_seed: u64,
    threshold_fraction: f64,
) -> Result<Vec<SweepRow>, AnalysisError> {
    if let Some(&bad) = s_values.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(AnalysisError::Simulation(SimulationError::Config(format!(
            "s must be positive, got {bad}"
        ))));
    }
    let mut exact_cfg = *template;
    exact_cfg.model = MeasurementModel::exact();
    let deterministic = run_trajectory(sim, x0, &exact_cfg, base_seed)?;
    s_values
        .iter()
        .map(|&s| {
            let mut cfg = *template;
            cfg.model = MeasurementModel::from_rate(template.model.mode, s, cfg.dt, base_seed);
            let series = ensemble_diagnostics(sim, x0, &cfg, base_seed, &deterministic, threshold_fraction)?;
            Ok(SweepRow {
                s,
                branch_time: series.0.branch_time,
                failures: series.1,
                correlation: series.0.entropy_error_correlation(),
            })
        })
        .collect()
}

/// Runs an ensemble and diagnoses its successful members.
///
/// Returns the series and the number of failed trajectories.
pub fn ensemble_diagnostics(
    sim: &Simulator,
    x0: &[f64],
    cfg: &SimulationConfig,
    base_seed: u64,
    deterministic: &TrajectoryResult,
    threshold_fraction: f64,
) -> Result<(DiagnosticsSeries, usize), AnalysisError> {
    let results = run_ensemble(sim, x0, cfg, base_seed)?;
    let total = results.len();
    let mut first_err = None;
    let ok: Vec<TrajectoryResult> = results
        .into_iter()
        .filter_map(|r| match r {
            Ok(t) => Some(t),
            Err(e) => {
                first_err.get_or_insert(e);
                None
            }
        })
        .collect();
    if ok.is_empty() {
        return Err(AnalysisError::AllFailed(first_err.expect("at least one member")));
    }
    let failures = total - ok.len();
    Ok((diagnostics(&ok, deterministic, threshold_fraction)?, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn basis(n: usize, k: usize) -> QuantumState {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        QuantumState::from_real(&v).unwrap()
    }

    fn diag(d: &[f64]) -> DensityMatrix {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0)));
        DensityMatrix::new(DMatrix::from_diagonal(&v)).unwrap()
    }

    #[test]
    fn pure_state_has_zero_entropy() {
        let s = QuantumState::from_real(&[0.6, 0.0, 0.8, 0.0]).unwrap();
        let rho = DensityMatrix::from_states(&[s.clone(), s.clone(), s]).unwrap();
        assert!(von_neumann_entropy(&rho).unwrap().abs() < 1e-12);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_pair_is_half_mixed() {
        let rho = DensityMatrix::from_states(&[basis(4, 0), basis(4, 2)]).unwrap();
        assert_eq!(rho.matrix()[(0, 0)].re, 0.5);
        assert_eq!(rho.matrix()[(2, 2)].re, 0.5);
        assert!((von_neumann_entropy(&rho).unwrap() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_reaches_bound() {
        let states: Vec<_> = (0..16).map(|k| basis(16, k)).collect();
        let rho = DensityMatrix::from_states(&states).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        assert!((s - 4.0 * 2f64.ln()).abs() < 1e-13);
        assert!((s - max_entropy(16)).abs() < 1e-13);
    }

    #[test]
    fn trace_distance_examples() {
        assert!(trace_distance(&diag(&[0.6, 0.4]), &diag(&[0.5, 0.5])).unwrap() - 0.1 < 1e-15);
        let a = DensityMatrix::pure(&basis(2, 0));
        let b = DensityMatrix::pure(&basis(2, 1));
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            trace_distance(&a, &diag(&[0.25; 4])),
            Err(AnalysisError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_density_matrices_are_rejected() {
        let v = DVector::from_vec(vec![Complex64::new(1.2, 0.0), Complex64::new(-0.2, 0.0)]);
        assert!(matches!(
            DensityMatrix::new(DMatrix::from_diagonal(&v)),
            Err(AnalysisError::NegativeEigenvalue(_))
        ));
        let v = DVector::from_vec(vec![Complex64::new(0.7, 0.0), Complex64::new(0.7, 0.0)]);
        assert!(DensityMatrix::new(DMatrix::from_diagonal(&v)).is_err());
    }

    #[test]
    fn branch_time_is_first_crossing() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let s = [0.0, 0.05, 0.2, 0.1];
        assert_eq!(branch_time(&t, &s, 0.1, 1.0), Some(2.0));
        assert_eq!(branch_time(&t, &s, 0.05, 1.0), Some(1.0));
        assert_eq!(branch_time(&t, &s, 0.5, 1.0), None);
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap() - 1.0).abs() < 1e-2);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
    }
}
