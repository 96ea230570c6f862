//! Python bindings: map systems, run trajectories and compute ensemble
//! diagnostics from Python.

use nalgebra::DVector;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qnlode_core::analysis::{self, DensityMatrix, DEFAULT_BRANCH_THRESHOLD};
use qnlode_core::artifact::PipelineArtifact;
use qnlode_core::mapping::{map_system, MapOptions};
use qnlode_core::poly::parse_system;
use qnlode_core::quantum::{MeasurementMode, MeasurementModel, QuantumState};
use qnlode_core::trajectory::{
    estimate_cost, run_ensemble, run_trajectory, SimulationConfig, Simulator, TrajectoryResult,
};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn state_from(amps: Vec<Complex64>) -> PyResult<QuantumState> {
    QuantumState::new(DVector::from_vec(amps)).map_err(value_err)
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

type RealRows = Vec<Vec<f64>>;
type ComplexRows = Vec<Vec<Complex64>>;

/// Observable-Hamiltonian form of a polynomial system.
#[pyclass(name = "Artifact", module = "qnlode", frozen)]
struct PyArtifact {
    inner: PipelineArtifact,
}

#[pymethods]
impl PyArtifact {
    #[staticmethod]
    #[pyo3(signature = (text, c = 1.0, degree = None, merge_pairs = false))]
    fn from_system(text: &str, c: f64, degree: Option<usize>, merge_pairs: bool) -> PyResult<Self> {
        let sys = parse_system(text).map_err(value_err)?;
        let opts = MapOptions {
            c,
            degree,
            merge_pairs,
        };
        let mapped = map_system(&sys, &opts).map_err(value_err)?;
        Ok(Self {
            inner: PipelineArtifact::new(&sys, &mapped, &opts),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PipelineArtifact::from_json(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    #[getter]
    fn pair_count(&self) -> usize {
        self.inner.pairs.len()
    }

    #[getter]
    fn raw_pair_count(&self) -> usize {
        self.inner.provenance.raw_pair_count
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.inner.original_n_vars
    }

    #[getter]
    fn grouped_dim(&self) -> usize {
        self.inner.grouped_dim
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim
    }

    #[getter]
    fn qubits(&self) -> u32 {
        self.inner.state_dim.trailing_zeros()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.q
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    /// Row-major observable and Hamiltonian of pair `k`.
    fn pair(&self, k: usize) -> PyResult<(RealRows, ComplexRows)> {
        let p = self
            .inner
            .pairs
            .get(k)
            .ok_or_else(|| PyValueError::new_err(format!("pair index {k} out of range")))?;
        let n = p.observable.rows;
        let o = p.observable.data.chunks(n).map(<[f64]>::to_vec).collect();
        let h = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| Complex64::new(p.hamiltonian.re[r * n + c], p.hamiltonian.im[r * n + c]))
                    .collect()
            })
            .collect();
        Ok((o, h))
    }

    fn __repr__(&self) -> String {
        format!(
            "Artifact(n_vars={}, degree={}, state_dim={}, pairs={})",
            self.inner.original_n_vars,
            self.inner.q,
            self.inner.state_dim,
            self.inner.pairs.len()
        )
    }
}

#[pyclass(name = "Trajectory", module = "qnlode", frozen)]
struct PyTrajectory {
    inner: TrajectoryResult,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn steps(&self) -> Vec<usize> {
        self.inner.classical.iter().map(|c| c.step).collect()
    }

    #[getter]
    fn t_prime(&self) -> Vec<f64> {
        self.inner.classical.iter().map(|c| c.t_prime).collect()
    }

    #[getter]
    fn t_physical(&self) -> Vec<f64> {
        self.inner.classical.iter().map(|c| c.t_physical).collect()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.inner.classical.iter().map(|c| c.x.clone()).collect()
    }

    #[getter]
    fn norm(&self) -> Vec<f64> {
        self.inner.classical.iter().map(|c| c.norm).collect()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<Complex64>> {
        self.inner
            .states
            .iter()
            .map(|s| s.amplitudes().iter().copied().collect())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Simulator", module = "qnlode", frozen)]
struct PySimulator {
    inner: Simulator,
}

#[allow(clippy::too_many_arguments)]
fn config(
    dt: f64,
    t_final: f64,
    mode: &str,
    m: Option<f64>,
    s: Option<f64>,
    seed: u64,
    stride: Option<usize>,
    k: usize,
) -> PyResult<SimulationConfig> {
    let mode: MeasurementMode = mode.parse().map_err(value_err)?;
    let model = match (mode, m, s) {
        (MeasurementMode::Exact, _, _) => MeasurementModel::exact(),
        (_, Some(m), None) => MeasurementModel {
            mode,
            shots: m,
            rng_seed: seed,
        },
        (_, None, Some(s)) => MeasurementModel::from_rate(mode, s, dt, seed),
        _ => return Err(PyValueError::new_err("give exactly one of m or s")),
    };
    let mut cfg = SimulationConfig::new(dt, t_final, model);
    cfg.ensemble_size = k;
    cfg.record_stride = stride;
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

#[pymethods]
impl PySimulator {
    #[new]
    fn new(artifact: &PyArtifact) -> PyResult<Self> {
        Ok(Self {
            inner: Simulator::from_artifact(&artifact.inner).map_err(value_err)?,
        })
    }

    #[pyo3(signature = (x0, dt, t_final, mode = "exact", m = None, s = None, seed = 0, stride = None))]
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        py: Python<'_>,
        x0: Vec<f64>,
        dt: f64,
        t_final: f64,
        mode: &str,
        m: Option<f64>,
        s: Option<f64>,
        seed: u64,
        stride: Option<usize>,
    ) -> PyResult<PyTrajectory> {
        let cfg = config(dt, t_final, mode, m, s, seed, stride, 1)?;
        let out = py.detach(|| run_trajectory(&self.inner, &x0, &cfg, seed));
        Ok(PyTrajectory {
            inner: out.map_err(runtime_err)?,
        })
    }

    /// Returns one entry per member: a trajectory, or the error message of a failed member.
    #[pyo3(signature = (x0, dt, t_final, k, mode = "gaussian", m = None, s = None, seed = 0, stride = None))]
    #[allow(clippy::too_many_arguments)]
    fn ensemble<'py>(
        &self,
        py: Python<'py>,
        x0: Vec<f64>,
        dt: f64,
        t_final: f64,
        k: usize,
        mode: &str,
        m: Option<f64>,
        s: Option<f64>,
        seed: u64,
        stride: Option<usize>,
    ) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let cfg = config(dt, t_final, mode, m, s, seed, stride, k)?;
        let results = py
            .detach(|| run_ensemble(&self.inner, &x0, &cfg, seed))
            .map_err(runtime_err)?;
        results
            .into_iter()
            .map(|r| match r {
                Ok(t) => Ok(Bound::new(py, PyTrajectory { inner: t })?.into_any()),
                Err(e) => Ok(e.to_string().into_pyobject(py)?.into_any()),
            })
            .collect()
    }
}

fn clone_runs(items: &[PyRef<'_, PyTrajectory>]) -> Vec<TrajectoryResult> {
    items.iter().map(|t| t.inner.clone()).collect()
}

/// Entropy and trace-distance series of an ensemble against a deterministic run.
#[pyfunction]
#[pyo3(signature = (ensemble, deterministic, threshold = DEFAULT_BRANCH_THRESHOLD))]
fn diagnostics<'py>(
    py: Python<'py>,
    ensemble: Vec<PyRef<'py, PyTrajectory>>,
    deterministic: PyRef<'py, PyTrajectory>,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let runs = clone_runs(&ensemble);
    let d = analysis::diagnostics(&runs, &deterministic.inner, threshold).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("t_prime", &d.times)?;
    out.set_item("entropy", &d.entropy)?;
    out.set_item("trace_distance", &d.trace_distance)?;
    out.set_item("branch_time", d.branch_time)?;
    out.set_item("max_entropy", d.max_entropy)?;
    out.set_item("correlation", d.entropy_error_correlation())?;
    Ok(out)
}

fn density(states: Vec<Vec<Complex64>>) -> PyResult<DensityMatrix> {
    let states = states.into_iter().map(state_from).collect::<PyResult<Vec<_>>>()?;
    DensityMatrix::from_states(&states).map_err(value_err)
}

/// Von Neumann entropy (natural log) of an equal-weight ensemble of states.
#[pyfunction]
fn von_neumann_entropy(states: Vec<Vec<Complex64>>) -> PyResult<f64> {
    analysis::von_neumann_entropy(&density(states)?).map_err(value_err)
}

/// Trace distance between two equal-weight ensembles.
#[pyfunction]
fn trace_distance(a: Vec<Vec<Complex64>>, b: Vec<Vec<Complex64>>) -> PyResult<f64> {
    analysis::trace_distance(&density(a)?, &density(b)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (pairs, t_final, dt, m, epsilon = None))]
fn cost<'py>(
    py: Python<'py>,
    pairs: usize,
    t_final: f64,
    dt: f64,
    m: f64,
    epsilon: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = estimate_cost(pairs as f64, t_final, dt, m, epsilon).map_err(PyValueError::new_err)?;
    let out = PyDict::new(py);
    out.set_item("steps", r.steps)?;
    out.set_item("measurements", r.measurements)?;
    out.set_item("states_consumed", r.states_consumed)?;
    out.set_item("mean_evolution_time", r.mean_evolution_time)?;
    out.set_item("simulation_steps", r.simulation_steps)?;
    out.set_item("epsilon", r.epsilon)?;
    out.set_item("epsilon_measurements", r.epsilon_measurements)?;
    Ok(out)
}

#[pymodule]
fn qnlode(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyArtifact>()?;
    m.add_class::<PySimulator>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(von_neumann_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    Ok(())
}
