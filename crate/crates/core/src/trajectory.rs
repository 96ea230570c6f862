//! Full simulations: encoding, the measure / assemble / advance loop,
//! classical reconstruction, ensembles and resource estimates.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{ArtifactError, PipelineArtifact};
use crate::mapping::{padded_dim, tensor_power, MappedSystem, OHPair};
use crate::poly::{PolyError, PolynomialSystem};
use crate::quantum::{
    assemble_hamiltonian, sample_expectation, unitary_step, MeasurementModel, Observable,
    QuantumError, QuantumState,
};

/// Upper bound on recorded snapshots when no stride is given.
pub const MAX_SNAPSHOTS: usize = 10_000;
/// Default lower bound on `y_(0..0)` accepted by [`decode_state`].
pub const DEFAULT_DECODE_FLOOR: f64 = 1e-12;
/// Largest amplitude tolerated on padding levels.
pub const PADDING_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reconstruction failed at step {step}: y_0 = {value:e}")]
    Reconstruction { step: usize, value: f64 },
    #[error("non-finite amplitude at step {step}")]
    NonFinite { step: usize },
    #[error("padding amplitude {leak:e} at step {step}")]
    PaddingLeak { step: usize, leak: f64 },
    #[error("initial condition has {got} components, system has {expected}")]
    InitialCondition { expected: usize, got: usize },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Dimensions and constants needed to encode and decode states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemLayout {
    pub c: f64,
    /// Homogeneous degree before norm preservation.
    pub q: usize,
    pub base_dim: usize,
    pub group_size: usize,
    pub grouped_dim: usize,
    pub state_dim: usize,
}

impl SystemLayout {
    pub fn original_n_vars(&self) -> usize {
        self.base_dim - 1
    }
}

/// Pairs with their observables prepared for repeated measurement.
#[derive(Debug, Clone)]
pub struct Simulator {
    layout: SystemLayout,
    pairs: Vec<OHPair>,
    observables: Vec<Observable>,
}

impl Simulator {
    pub fn new(layout: SystemLayout, pairs: Vec<OHPair>) -> Result<Self, SimulationError> {
        let observables = pairs
            .iter()
            .map(|p| {
                if p.dim() != layout.state_dim {
                    return Err(QuantumError::DimensionMismatch {
                        expected: layout.state_dim,
                        got: p.dim(),
                    });
                }
                Observable::new(p.observable.clone())
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            layout,
            pairs,
            observables,
        })
    }

    pub fn from_mapped(mapped: &MappedSystem) -> Result<Self, SimulationError> {
        let layout = SystemLayout {
            c: mapped.record.c,
            q: mapped.source_degree(),
            base_dim: mapped.reduced.base_dim(),
            group_size: mapped.reduced.group_size(),
            grouped_dim: mapped.reduced.grouped_dim(),
            state_dim: mapped.state_dim(),
        };
        Self::new(layout, mapped.pairs.clone())
    }

    pub fn from_artifact(art: &PipelineArtifact) -> Result<Self, ArtifactError> {
        let layout = SystemLayout {
            c: art.c,
            q: art.q,
            base_dim: art.base_dim,
            group_size: art.group_size,
            grouped_dim: art.grouped_dim,
            state_dim: art.state_dim,
        };
        Self::new(layout, art.pairs()?).map_err(|e| ArtifactError::Pair {
            index: 0,
            message: e.to_string(),
        })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn pairs(&self) -> &[OHPair] {
        &self.pairs
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Step in rescaled time `t'`.
    pub dt: f64,
    pub t_final: f64,
    pub model: MeasurementModel,
    pub ensemble_size: usize,
    /// Steps between snapshots; `None` keeps at most [`MAX_SNAPSHOTS`].
    pub record_stride: Option<usize>,
    pub decode_floor: f64,
}

impl SimulationConfig {
    pub fn new(dt: f64, t_final: f64, model: MeasurementModel) -> Self {
        Self {
            dt,
            t_final,
            model,
            ensemble_size: 1,
            record_stride: None,
            decode_floor: DEFAULT_DECODE_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimulationError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(SimulationError::Config(format!(
                "t_final must be at least dt, got {}",
                self.t_final
            )));
        }
        if self.ensemble_size == 0 {
            return Err(SimulationError::Config("ensemble size must be at least 1".into()));
        }
        if self.record_stride == Some(0) {
            return Err(SimulationError::Config("record stride must be at least 1".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    /// `ceil(t_final / dt)`, ignoring rounding noise in the ratio.
    pub fn steps(&self) -> usize {
        let r = self.t_final / self.dt;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }

    pub fn stride(&self) -> usize {
        self.record_stride
            .unwrap_or_else(|| self.steps().div_ceil(MAX_SNAPSHOTS - 2).max(1))
    }
}

/// Decoded classical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSample {
    pub step: usize,
    pub t_prime: f64,
    pub t_physical: f64,
    pub x: Vec<f64>,
    /// `|(c, x)|`.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub states: Vec<QuantumState>,
    pub classical: Vec<ClassicalSample>,
    pub seed: u64,
}

impl TrajectoryResult {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_sample(&self) -> &ClassicalSample {
        self.classical.last().expect("trajectory has at least one sample")
    }
}

/// `y = x_hat^(g)` with `x_hat = (c, x0) / |(c, x0)|`, zero-padded to a power of two.
pub fn encode_initial(x0: &[f64], c: f64, group_size: usize) -> Result<QuantumState, SimulationError> {
    if !(c > 0.0 && c.is_finite()) || x0.iter().any(|v| !v.is_finite()) {
        return Err(SimulationError::Config("initial condition and c must be finite, c > 0".into()));
    }
    let mut x = Vec::with_capacity(x0.len() + 1);
    x.push(c);
    x.extend_from_slice(x0);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let y = tensor_power(&x, group_size);
    let dim = padded_dim(y.len());
    let mut amps = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (a, v) in amps.iter_mut().zip(y) {
        a.re = v;
    }
    Ok(QuantumState::normalized(amps))
}

/// Recovers `(x, |(c, x)|)` from the `y_(0..0i)` components.
///
/// Fails with the offending `y_(0..0)` value if it is at or below `floor`.
pub fn decode_state(
    state: &QuantumState,
    c: f64,
    base_dim: usize,
    group_size: usize,
    floor: f64,
) -> Result<(Vec<f64>, f64), f64> {
    let a = state.amplitudes();
    let y00 = a[0].re;
    if y00 <= floor || y00.is_nan() {
        return Err(y00);
    }
    let x0 = y00.powf(1.0 / group_size as f64);
    let lead = x0.powi(group_size as i32 - 1);
    let norm = c / x0;
    let x = (1..base_dim).map(|i| norm * a[i].re / lead).collect();
    Ok((x, norm))
}

/// Counter-based seed for ensemble member `index`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng.next_u64()
}

fn padding_leak(state: &QuantumState, grouped_dim: usize) -> f64 {
    state.amplitudes().iter().skip(grouped_dim).fold(0.0, |m, a| m.max(a.norm()))
}

/// Runs one trajectory for `ceil(t_final / dt)` steps.
///
/// Each step draws every pair weight from its own RNG stream (keyed by
/// `seed` and the step index), assembles the snapshot Hamiltonian and applies
/// the exact unitary. Snapshots are kept at step 0, every `stride` steps and
/// at the last step.
pub fn run_trajectory(
    sim: &Simulator,
    x0: &[f64],
    cfg: &SimulationConfig,
    seed: u64,
) -> Result<TrajectoryResult, SimulationError> {
    cfg.validate()?;
    let lay = sim.layout;
    if x0.len() != lay.original_n_vars() {
        return Err(SimulationError::InitialCondition {
            expected: lay.original_n_vars(),
            got: x0.len(),
        });
    }
    let mut state = encode_initial(x0, lay.c, lay.group_size)?;
    let decode = |s: &QuantumState, step: usize| {
        decode_state(s, lay.c, lay.base_dim, lay.group_size, cfg.decode_floor)
            .map_err(|value| SimulationError::Reconstruction { step, value })
    };
    let scale = |norm: f64| norm.powi(1 - lay.q as i32);

    let steps = cfg.steps();
    let stride = cfg.stride();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; sim.pairs.len()];

    let (x, norm) = decode(&state, 0)?;
    let mut t_phys = 0.0;
    let mut last_scale = scale(norm);
    let mut result = TrajectoryResult {
        states: vec![state.clone()],
        classical: vec![ClassicalSample {
            step: 0,
            t_prime: 0.0,
            t_physical: 0.0,
            x,
            norm,
        }],
        seed,
    };

    for step in 1..=steps {
        rng.set_stream(step as u64);
        rng.set_word_pos(0);
        for (w, obs) in weights.iter_mut().zip(&sim.observables) {
            *w = sample_expectation(&state, obs, &cfg.model, &mut rng)?;
        }
        if !sim.pairs.is_empty() {
            let h = assemble_hamiltonian(&sim.pairs, &weights)?;
            state = unitary_step(&state, &h, cfg.dt)?;
        }
        if state.amplitudes().iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(SimulationError::NonFinite { step });
        }
        let leak = padding_leak(&state, lay.grouped_dim);
        if leak > PADDING_TOL {
            return Err(SimulationError::PaddingLeak { step, leak });
        }
        let (x, norm) = decode(&state, step)?;
        let s = scale(norm);
        t_phys += 0.5 * cfg.dt * (last_scale + s);
        last_scale = s;
        if step % stride == 0 || step == steps {
            result.states.push(state.clone());
            result.classical.push(ClassicalSample {
                step,
                t_prime: step as f64 * cfg.dt,
                t_physical: t_phys,
                x,
                norm,
            });
        }
    }
    Ok(result)
}

/// `cfg.ensemble_size` trajectories seeded by [`derive_seed`], in index order.
///
/// Failures are returned in place; they do not stop the other members.
pub fn run_ensemble(
    sim: &Simulator,
    x0: &[f64],
    cfg: &SimulationConfig,
    base_seed: u64,
) -> Result<Vec<Result<TrajectoryResult, SimulationError>>, SimulationError> {
    cfg.validate()?;
    Ok((0..cfg.ensemble_size as u64)
        .into_par_iter()
        .map(|k| run_trajectory(sim, x0, cfg, derive_seed(base_seed, k)))
        .collect())
}

/// Resource counts of the copy-and-consume protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub pairs: f64,
    pub total_time: f64,
    pub dt: f64,
    pub shots: f64,
    pub steps: f64,
    /// `m M T / dt`.
    pub measurements: f64,
    pub states_consumed: f64,
    /// Average evolution length of a consumed state, `T / 2`.
    pub mean_evolution_time: f64,
    /// `M T^2 m / (2 dt^2)`.
    pub simulation_steps: f64,
    pub epsilon: f64,
    /// `M T / (epsilon dt)`.
    pub epsilon_measurements: f64,
}

/// Cost of a run with `pairs` pairs over `total_time` with `shots` per step.
///
/// `epsilon` defaults to `1 / shots`.
pub fn estimate_cost(
    pairs: f64,
    total_time: f64,
    dt: f64,
    shots: f64,
    epsilon: Option<f64>,
) -> Result<CostReport, String> {
    let epsilon = epsilon.unwrap_or(1.0 / shots);
    for (name, v) in [
        ("pair count", pairs),
        ("total time", total_time),
        ("dt", dt),
        ("m", shots),
        ("epsilon", epsilon),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("{name} must be positive and finite, got {v}"));
        }
    }
    let steps = total_time / dt;
    let measurements = shots * pairs * total_time / dt;
    Ok(CostReport {
        pairs,
        total_time,
        dt,
        shots,
        steps,
        measurements,
        states_consumed: measurements,
        mean_evolution_time: total_time / 2.0,
        simulation_steps: pairs * total_time * total_time * shots / (2.0 * dt * dt),
        epsilon,
        epsilon_measurements: pairs * total_time / (epsilon * dt),
    })
}

/// A point of a classical reference solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub t_physical: f64,
    pub t_prime: f64,
    pub x: Vec<f64>,
}

fn rk4_step<F: Fn(&[f64]) -> Vec<f64>>(f: &F, u: &[f64], h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
    let k1 = f(u);
    let k2 = f(&add(u, &k1, h / 2.0));
    let k3 = f(&add(u, &k2, h / 2.0));
    let k4 = f(&add(u, &k3, h));
    (0..u.len())
        .map(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Classical RK4 of `dx/dt = G(x)` in rescaled time, tracking physical time.
///
/// Integrates `dx/dt' = G(x) r^{1-q}` and `dt/dt' = r^{1-q}` with
/// `r = |(c, x)|`, returning `steps + 1` samples spaced by `dt_prime`.
pub fn reference_rescaled(
    sys: &PolynomialSystem,
    x0: &[f64],
    c: f64,
    q: usize,
    dt_prime: f64,
    steps: usize,
) -> Result<Vec<ReferenceSample>, PolyError> {
    let n = sys.n_vars();
    if x0.len() != n {
        return Err(PolyError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let rhs = |u: &[f64]| {
        let x = &u[..n];
        let r2 = c * c + x.iter().map(|v| v * v).sum::<f64>();
        let s = r2.powf((1.0 - q as f64) / 2.0);
        let g = sys.evaluate(x).expect("dimension checked");
        let mut out: Vec<f64> = g.into_iter().map(|v| v * s).collect();
        out.push(s);
        out
    };
    let mut u: Vec<f64> = x0.to_vec();
    u.push(0.0);
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        out.push(ReferenceSample {
            t_physical: u[n],
            t_prime: k as f64 * dt_prime,
            x: u[..n].to_vec(),
        });
        if k < steps {
            u = rk4_step(&rhs, &u, dt_prime);
        }
    }
    Ok(out)
}

/// Rescaled time `t'` at which physical time reaches `t_physical`.
///
/// RK4 in physical time with step `h` on `dt'/dt = |(c, x)|^{q-1}`.
pub fn rescaled_time_at(
    sys: &PolynomialSystem,
    x0: &[f64],
    c: f64,
    q: usize,
    t_physical: f64,
    h: f64,
) -> Result<f64, PolyError> {
    let n = sys.n_vars();
    if x0.len() != n {
        return Err(PolyError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let rhs = |u: &[f64]| {
        let x = &u[..n];
        let r2 = c * c + x.iter().map(|v| v * v).sum::<f64>();
        let mut out = sys.evaluate(x).expect("dimension checked");
        out.push(r2.powf((q as f64 - 1.0) / 2.0));
        out
    };
    let steps = (t_physical / h).ceil().max(1.0) as usize;
    let h = t_physical / steps as f64;
    let mut u: Vec<f64> = x0.to_vec();
    u.push(0.0);
    for _ in 0..steps {
        u = rk4_step(&rhs, &u, h);
    }
    Ok(u[n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{map_system, MapOptions};
    use crate::poly::parse_system;

    fn logistic() -> (PolynomialSystem, Simulator) {
        let sys = parse_system("dx1/dt = x1 - x1^2").unwrap();
        let mapped = map_system(&sys, &MapOptions::default()).unwrap();
        let sim = Simulator::from_mapped(&mapped).unwrap();
        (sys, sim)
    }

    #[test]
    fn encode_logistic_initial_condition() {
        let s = encode_initial(&[0.01], 1.0, 2).unwrap();
        let n = (1.0f64 + 1e-4).sqrt();
        let (a, b) = (1.0 / n, 0.01 / n);
        let expect = [a * a, a * b, a * b, b * b];
        for (got, want) in s.real_parts().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((a - 0.99995).abs() < 1e-6 && (b - 0.0099995).abs() < 1e-7);
    }

    #[test]
    fn encode_zero_vector() {
        let s = encode_initial(&[0.0, 0.0], 1.0, 2).unwrap();
        assert_eq!(s.dim(), 16);
        assert_eq!(s.real_parts()[0], 1.0);
        assert!(s.real_parts()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lorenz_encoding_round_trips() {
        let x = [4.856, 7.291, 18.987];
        let s = encode_initial(&x, 1.0, 2).unwrap();
        assert_eq!(s.dim(), 16);
        assert!((s.norm() - 1.0).abs() < 1e-14);
        let (back, norm) = decode_state(&s, 1.0, 4, 2, 1e-12).unwrap();
        for (a, b) in back.iter().zip(x) {
            assert!((a - b).abs() < 1e-12 * b);
        }
        let r = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert!((norm - r).abs() < 1e-12 * r);
    }

    #[test]
    fn decode_hand_built_state() {
        let s = QuantumState::from_real(&[0.36, 0.48, 0.48, 0.64]).unwrap();
        let (x, norm) = decode_state(&s, 1.0, 2, 2, 1e-12).unwrap();
        assert!((norm - 1.0 / 0.6).abs() < 1e-14);
        assert!((x[0] - 0.8 / 0.6).abs() < 1e-14);
        let bad = QuantumState::from_real(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(decode_state(&bad, 1.0, 2, 2, 1e-12), Err(0.0));
    }

    #[test]
    fn steps_and_stride() {
        let cfg = SimulationConfig::new(1e-3, 10.0, MeasurementModel::exact());
        assert_eq!(cfg.steps(), 10_000);
        let cfg = SimulationConfig::new(0.3, 1.0, MeasurementModel::exact());
        assert_eq!(cfg.steps(), 4);
        let cfg = SimulationConfig::new(1e-4, 10.0, MeasurementModel::exact());
        assert!(cfg.steps() / cfg.stride() + 2 <= MAX_SNAPSHOTS);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimulationConfig::new(0.0, 1.0, MeasurementModel::exact());
        assert!(cfg.validate().is_err());
        cfg.dt = 0.1;
        cfg.ensemble_size = 0;
        assert!(cfg.validate().is_err());
        cfg.ensemble_size = 1;
        cfg.t_final = 0.01;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_dynamics_stays_constant() {
        let sys = parse_system("dx1/dt = 0\ndx2/dt = 0").unwrap();
        let mapped = map_system(&sys, &MapOptions::default()).unwrap();
        let sim = Simulator::from_mapped(&mapped).unwrap();
        let cfg = SimulationConfig::new(0.1, 2.0, MeasurementModel::exact());
        let r = run_trajectory(&sim, &[0.3, -0.2], &cfg, 1).unwrap();
        assert_eq!(r.len(), 21);
        for (s, c) in r.states.iter().zip(&r.classical) {
            assert_eq!(s, &r.states[0]);
            assert_eq!(c.x, r.classical[0].x);
        }
    }

    #[test]
    fn seeded_gaussian_runs_are_identical() {
        let (_, sim) = logistic();
        let cfg = SimulationConfig::new(1e-2, 1.0, MeasurementModel::gaussian(50.0, 0));
        let a = run_trajectory(&sim, &[0.01], &cfg, 9).unwrap();
        let b = run_trajectory(&sim, &[0.01], &cfg, 9).unwrap();
        let c = run_trajectory(&sim, &[0.01], &cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_member_ensemble_matches_trajectory() {
        let (_, sim) = logistic();
        let cfg = SimulationConfig::new(1e-2, 0.5, MeasurementModel::exact());
        let ens = run_ensemble(&sim, &[0.01], &cfg, 4).unwrap();
        let one = run_trajectory(&sim, &[0.01], &cfg, derive_seed(4, 0)).unwrap();
        assert_eq!(ens.len(), 1);
        assert_eq!(ens[0].as_ref().unwrap(), &one);
    }

    #[test]
    fn physical_time_increases_and_norm_bounded_by_c() {
        let (_, sim) = logistic();
        let cfg = SimulationConfig::new(1e-2, 3.0, MeasurementModel::exact());
        let r = run_trajectory(&sim, &[0.01], &cfg, 0).unwrap();
        for w in r.classical.windows(2) {
            assert!(w[1].t_physical > w[0].t_physical);
            assert!(w[1].t_prime > w[0].t_prime);
        }
        assert!(r.classical.iter().all(|c| c.norm >= 1.0));
    }

    #[test]
    fn wrong_initial_condition_length() {
        let (_, sim) = logistic();
        let cfg = SimulationConfig::new(1e-2, 1.0, MeasurementModel::exact());
        assert_eq!(
            run_trajectory(&sim, &[0.1, 0.2], &cfg, 0),
            Err(SimulationError::InitialCondition { expected: 1, got: 2 })
        );
    }

    #[test]
    fn cost_arithmetic() {
        let r = estimate_cost(1.0, 1.0, 0.1, 10.0, None).unwrap();
        assert!((r.measurements - 100.0).abs() < 1e-9);
        assert!((r.simulation_steps - 500.0).abs() < 1e-9);
        assert!((r.epsilon_measurements - 100.0).abs() < 1e-9);
        assert_eq!(r.mean_evolution_time, 0.5);
        let published = estimate_cost(26.0, 1.0, 1e-5, 1e10, None).unwrap();
        assert!((published.measurements / 2.6e16 - 1.0).abs() < 1e-12);
        assert!(estimate_cost(1.0, 1.0, 0.1, 0.0, None).is_err());
    }

    #[test]
    fn reference_matches_closed_form_logistic() {
        let (sys, _) = logistic();
        let t_end = rescaled_time_at(&sys, &[0.01], 1.0, 3, 10.0, 1e-3).unwrap();
        let refs = reference_rescaled(&sys, &[0.01], 1.0, 3, t_end / 20_000.0, 20_000).unwrap();
        let last = refs.last().unwrap();
        assert!((last.t_physical - 10.0).abs() < 1e-8);
        let exact = 0.01 * 10f64.exp() / (1.0 + 0.01 * (10f64.exp() - 1.0));
        assert!((last.x[0] - exact).abs() < 1e-9);
    }
}
