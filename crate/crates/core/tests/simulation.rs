mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qnlode_core::analysis::*;
use qnlode_core::quantum::{MeasurementMode, MeasurementModel, QuantumState};
use qnlode_core::trajectory::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn logistic_sim() -> Simulator {
    Simulator::from_mapped(&mapped(&logistic(), false)).unwrap()
}

/// Exact-mode sup error against RK4 on the same `t'` grid.
fn exact_mode_error(dt: f64, t_final: f64) -> f64 {
    let sys = logistic();
    let sim = logistic_sim();
    let cfg = SimulationConfig::new(dt, t_final, MeasurementModel::exact());
    let run = run_trajectory(&sim, &[0.01], &cfg, 0).unwrap();
    let refs = reference_rescaled(&sys, &[0.01], 1.0, 3, dt, cfg.steps()).unwrap();
    run.classical
        .iter()
        .map(|c| (c.x[0] - refs[c.step].x[0]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn exact_mode_is_first_order_in_dt() {
    let e1 = exact_mode_error(4e-3, 8.0);
    let e2 = exact_mode_error(2e-3, 8.0);
    assert!(e1 <= 0.05 && e2 <= 0.5 * e1 * 1.05, "{e1:e} {e2:e}");
}

#[test]
fn long_logistic_run_reaches_the_fixed_point() {
    let sim = logistic_sim();
    let cfg = SimulationConfig::new(1e-2, 40.0, MeasurementModel::exact());
    let r = run_trajectory(&sim, &[0.01], &cfg, 0).unwrap();
    let end = r.final_sample();
    assert!((end.x[0] - 1.0).abs() < 1e-3, "{:?}", end);
    assert!((end.x[0] - logistic_closed_form(0.01, end.t_physical)).abs() < 1e-3);
    assert!(r.classical.iter().all(|c| c.norm >= 1.0));
}

#[test]
fn lorenz_exact_run_tracks_reference_early() {
    let sys = lorenz(8.0 / 3.0);
    let sim = Simulator::from_mapped(&mapped(&sys, false)).unwrap();
    let mut cfg = SimulationConfig::new(0.05, 200.0, MeasurementModel::exact());
    cfg.record_stride = Some(100);
    let r = run_trajectory(&sim, &LORENZ_X0, &cfg, 0).unwrap();
    let refs = reference_rescaled(&sys, &LORENZ_X0, 1.0, 3, 0.005, cfg.steps() * 10).unwrap();
    for c in &r.classical {
        let rf = &refs[c.step * 10];
        assert!(max_abs_diff(&c.x, &rf.x) < 0.05 * max_abs(&rf.x), "{c:?} vs {rf:?}");
        assert!((c.t_physical - rf.t_physical).abs() < 1e-3);
        assert!(c.norm >= 1.0);
    }
    for w in r.classical.windows(2) {
        assert!(w[1].t_physical > w[0].t_physical);
    }
}

fn mean_deviation(s: f64, k: usize, det: &TrajectoryResult, cfg: &SimulationConfig) -> f64 {
    let sim = logistic_sim();
    let mut cfg = *cfg;
    cfg.model = MeasurementModel::from_rate(MeasurementMode::Gaussian, s, cfg.dt, 0);
    cfg.ensemble_size = k;
    let runs: Vec<_> = run_ensemble(&sim, &[0.01], &cfg, 21)
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let n = det.len();
    (0..n)
        .map(|i| {
            let mean = runs.iter().map(|r| r.classical[i].x[0]).sum::<f64>() / k as f64;
            (mean - det.classical[i].x[0]).abs()
        })
        .sum::<f64>()
        / n as f64
}

#[test]
fn ensemble_mean_converges_with_sampling_rate() {
    let sim = logistic_sim();
    let mut cfg = SimulationConfig::new(1e-3, 12.0, MeasurementModel::exact());
    cfg.record_stride = Some(200);
    let det = run_trajectory(&sim, &[0.01], &cfg, 0).unwrap();
    let devs: Vec<f64> = [1e4, 1e5, 1e6]
        .iter()
        .map(|&s| mean_deviation(s, 50, &det, &cfg))
        .collect();
    assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
}

#[test]
fn ensemble_is_schedule_independent() {
    let sim = logistic_sim();
    let mut cfg = SimulationConfig::new(1e-2, 2.0, MeasurementModel::shot(20, 0));
    cfg.ensemble_size = 6;
    let a = run_ensemble(&sim, &[0.01], &cfg, 5).unwrap();
    let serial: Vec<_> = (0..6)
        .map(|k| run_trajectory(&sim, &[0.01], &cfg, derive_seed(5, k)))
        .collect();
    assert_eq!(a, serial);
}

#[test]
fn ensemble_keeps_going_after_failures() {
    let sim = logistic_sim();
    let mut cfg = SimulationConfig::new(1e-2, 3.0, MeasurementModel::gaussian(1.0, 0));
    cfg.ensemble_size = 8;
    cfg.decode_floor = 0.9;
    let runs = run_ensemble(&sim, &[0.01], &cfg, 3).unwrap();
    assert_eq!(runs.len(), 8);
    assert!(runs
        .iter()
        .any(|r| matches!(r, Err(SimulationError::Reconstruction { .. }))));
}

fn random_density<R: Rng>(rng: &mut R, n: usize) -> DensityMatrix {
    let k = rng.random_range(1..=n);
    let states: Vec<QuantumState> = (0..k)
        .map(|_| {
            QuantumState::normalized(DVector::from_iterator(
                n,
                (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
            ))
        })
        .collect();
    DensityMatrix::from_states(&states).unwrap()
}

#[test]
fn trace_distance_axioms_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let (a, b, c) = (
            random_density(&mut rng, 8),
            random_density(&mut rng, 8),
            random_density(&mut rng, 8),
        );
        let ab = trace_distance(&a, &b).unwrap();
        let ba = trace_distance(&b, &a).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        assert!((ab - ba).abs() <= 1e-10);
        assert!(trace_distance(&a, &a).unwrap() <= 1e-10);
        assert!(ac <= ab + bc + 1e-10);
        assert!((0.0..=1.0).contains(&ab));
    }
}

#[test]
fn entropy_stays_within_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..50 {
        let rho = random_density(&mut rng, 16);
        let s = von_neumann_entropy(&rho).unwrap();
        assert!((0.0..=max_entropy(16) + 1e-12).contains(&s));
    }
}

#[test]
fn perturbed_ensemble_is_nearly_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let base = random_unit(&mut rng, 16);
    let states: Vec<QuantumState> = (0..300)
        .map(|_| {
            let v: Vec<f64> = base.iter().map(|b| b + 1e-3 * rng.random_range(-1.0..1.0)).collect();
            QuantumState::normalized(DVector::from_iterator(16, v.iter().map(|&a| Complex64::new(a, 0.0))))
        })
        .collect();
    let rho = DensityMatrix::from_states(&states).unwrap();
    let top = *rho.eigenvalues().last().unwrap();
    assert!(top >= 0.99, "{top}");
    assert!(!rho.is_pure());
}

#[test]
fn density_matrix_validation() {
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
    ]));
    assert!(DensityMatrix::new(m).is_ok());
    assert_eq!(DensityMatrix::from_states(&[]), Err(AnalysisError::Empty));
}

#[test]
fn clones_of_the_deterministic_run_have_no_entropy() {
    let sim = logistic_sim();
    let mut cfg = SimulationConfig::new(1e-2, 3.0, MeasurementModel::exact());
    cfg.record_stride = Some(10);
    let det = run_trajectory(&sim, &[0.01], &cfg, 0).unwrap();
    let d = diagnostics(&[det.clone(), det.clone(), det.clone()], &det, 0.1).unwrap();
    assert!(d.entropy.iter().all(|&s| s == 0.0));
    assert!(d.trace_distance.iter().all(|&t| t == 0.0));
    assert_eq!(d.branch_time, None);
    let single = diagnostics(std::slice::from_ref(&det), &det, 0.1).unwrap();
    assert_eq!(single, d);
}

#[test]
fn grid_mismatch_is_reported() {
    let sim = logistic_sim();
    let cfg = SimulationConfig::new(1e-2, 1.0, MeasurementModel::exact());
    let det = run_trajectory(&sim, &[0.01], &cfg, 0).unwrap();
    let mut cfg2 = cfg;
    cfg2.record_stride = Some(7);
    let other = run_trajectory(&sim, &[0.01], &cfg2, 0).unwrap();
    assert!(matches!(
        diagnostics(&[other], &det, 0.1),
        Err(AnalysisError::GridMismatch(_))
    ));
}

#[test]
fn lower_threshold_branches_no_later() {
    let sys = lorenz(8.0 / 3.0);
    let sim = Simulator::from_mapped(&mapped(&sys, false)).unwrap();
    let mut cfg = SimulationConfig::new(0.1, 150.0, MeasurementModel::gaussian(1e3 * 0.1, 0));
    cfg.ensemble_size = 6;
    cfg.record_stride = Some(10);
    let mut exact = cfg;
    exact.model = MeasurementModel::exact();
    let det = run_trajectory(&sim, &LORENZ_X0, &exact, 0).unwrap();
    let runs: Vec<_> = run_ensemble(&sim, &LORENZ_X0, &cfg, 2)
        .unwrap()
        .into_iter()
        .filter_map(Result::ok)
        .collect();
    let d10 = diagnostics(&runs, &det, 0.1).unwrap();
    let d05 = diagnostics(&runs, &det, 0.05).unwrap();
    assert_eq!(d10.entropy[0], 0.0);
    assert!(d05.branch_time.is_some());
    if let Some(t10) = d10.branch_time {
        assert!(d05.branch_time.unwrap() <= t10);
    }
    for s in &d10.entropy {
        assert!((0.0..=d10.max_entropy).contains(s));
    }
}

#[test]
fn single_rate_sweep_has_one_row() {
    let sim = logistic_sim();
    let mut cfg = SimulationConfig::new(1e-2, 2.0, MeasurementModel::gaussian(1.0, 0));
    cfg.ensemble_size = 4;
    cfg.record_stride = Some(20);
    let rows = branch_scaling_sweep(&sim, &[0.01], &[1e4], &cfg, 0, 0.1).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].s, 1e4);
    assert!(branch_scaling_sweep(&sim, &[0.01], &[-1.0], &cfg, 0, 0.1).is_err());
}
