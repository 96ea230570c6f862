use std::fs;
use std::path::Path;

use qnlode_core::artifact::PipelineArtifact;
use qnlode_core::poly::parse_system;
use qnlode_core::quantum::MeasurementMode;
use qnlode_core::trajectory::rescaled_time_at;

use crate::commands::*;
use crate::output::ensure_dir;
use crate::{out_dir, CliError, DemoArgs, DemoName, RunFlags};

pub const DEMO_HELP: &str = "\
Defaults (desk scale, every value can be overridden by flags; times are in t'):
  logistic        dx1/dt = x1 - x1^2, x1(0) = 0.01, dt 1e-3, t' up to physical t = 10,
                  shot mode, s 5e5 (m = 500), K 10, stride 100
  lorenz-stable   sigma 10, rho 28, beta 10, x = (4.856, 7.291, 18.987),
                  dt 0.05, t' 2300, gaussian mode, s 1e9, K 30, stride 50
  lorenz-chaotic  as lorenz-stable with beta 8/3 and s 1e8
--paper-scale prints the cost of one trajectory and of the full ensemble at
dt 1e-5, s 1e15, K 300 (Lorenz) or dt 1e-3, s 5e5, K 10 (logistic) over the
same t' window, without running anything.";

const LOGISTIC: &str = "# logistic\ndx1/dt = x1 - x1^2\n";
const LORENZ_X0: [f64; 3] = [4.856, 7.291, 18.987];

fn lorenz(beta: &str) -> String {
    format!("# Lorenz\ndx1/dt = 10*(x2 - x1)\ndx2/dt = x1*(28 - x3) - x2\ndx3/dt = x1*x2 - {beta}*x3\n")
}

struct Setup {
    x0: Vec<f64>,
    defaults: RunDefaults,
    published: (f64, f64, usize),
}

fn setup(name: DemoName, art: &PipelineArtifact, flags: &RunFlags) -> Result<Setup, CliError> {
    Ok(match name {
        DemoName::Logistic => {
            let sys = parse_system(LOGISTIC).map_err(|e| CliError::Pipeline(e.to_string()))?;
            let t_final = match flags.t_final {
                Some(t) => t,
                None => rescaled_time_at(&sys, &[0.01], art.c, art.q, 10.0, 1e-4)
                    .map_err(|e| CliError::Pipeline(e.to_string()))?,
            };
            Setup {
                x0: vec![0.01],
                defaults: RunDefaults {
                    dt: Some(1e-3),
                    t_final: Some(t_final),
                    mode: MeasurementMode::Shot,
                    k: 10,
                    s: Some(5e5),
                    stride: Some(100),
                },
                published: (1e-3, 5e5, 10),
            }
        }
        DemoName::LorenzStable | DemoName::LorenzChaotic => {
            let chaotic = name == DemoName::LorenzChaotic;
            Setup {
                x0: LORENZ_X0.to_vec(),
                defaults: RunDefaults {
                    dt: Some(0.05),
                    t_final: Some(2300.0),
                    mode: MeasurementMode::Gaussian,
                    k: 30,
                    s: Some(if chaotic { 1e8 } else { 1e9 }),
                    stride: Some(50),
                },
                published: (1e-5, 1e15, 300),
            }
        }
    })
}

fn system_text(name: DemoName) -> String {
    match name {
        DemoName::Logistic => LOGISTIC.into(),
        DemoName::LorenzStable => lorenz("10"),
        DemoName::LorenzChaotic => lorenz(&(8.0f64 / 3.0).to_string()),
    }
}

fn closed_form_logistic(x0: f64, t: f64) -> f64 {
    let e = t.exp();
    x0 * e / (1.0 + x0 * (e - 1.0))
}

pub fn run(a: &DemoArgs) -> Result<(), CliError> {
    let dir = out_dir(a.out.as_ref());
    ensure_dir(&dir)?;
    let sys_path = dir.join("system.txt");
    fs::write(&sys_path, system_text(a.name)).map_err(|e| CliError::io(&sys_path, e))?;
    let (art, mapped) = map_file(&sys_path, &a.map)?;
    let s = setup(a.name, &art, &a.run)?;
    if a.paper_scale {
        let (dt, rate, k) = s.published;
        let t = a.run.t_final.or(s.defaults.t_final).unwrap_or(0.0);
        println!("one trajectory:");
        print_cost(art.pairs.len(), t, dt, rate * dt, None)?;
        println!("ensemble of {k}: {:e} measurements", k as f64 * art.pairs.len() as f64 * rate * t);
        return Ok(());
    }
    let artifact = write_artifact(&dir, &art)?;
    print_map_summary(&art, &mapped);
    let threshold = a.threshold.unwrap_or(qnlode_core::analysis::DEFAULT_BRANCH_THRESHOLD);

    let exact_flags = RunFlags {
        mode: Some(crate::ModeArg::Exact),
        k: Some(1),
        ..a.run.clone()
    };
    let det_manifest = simulate_manifest(&artifact, &s.x0, &exact_flags, s.defaults)?;
    let det_dir = dir.join("deterministic");
    let det = run_simulation(&det_manifest, &det_dir)?;
    let ens_manifest = simulate_manifest(&artifact, &s.x0, &a.run, s.defaults)?;
    let ens_dir = dir.join("ensemble");
    let ens = run_simulation(&ens_manifest, &ens_dir)?;
    if ens.runs.is_empty() {
        return Err(CliError::Simulation("every trajectory failed".into()));
    }
    let d = run_analysis(&ens_dir, &det_dir.join("trajectory_000.csv"), threshold, &dir.join("analysis"))?;
    print_diagnostics(&d);
    summarize(a.name, &det.runs[0], &ens.runs, &dir);
    if ens.failures > 0 {
        return Err(CliError::Simulation(format!("{} trajectories failed", ens.failures)));
    }
    Ok(())
}

fn summarize(
    name: DemoName,
    det: &qnlode_core::trajectory::TrajectoryResult,
    ens: &[qnlode_core::trajectory::TrajectoryResult],
    dir: &Path,
) {
    let end = det.final_sample();
    let k = ens.len() as f64;
    let mean: Vec<f64> = (0..end.x.len())
        .map(|i| ens.iter().map(|r| r.final_sample().x[i]).sum::<f64>() / k)
        .collect();
    println!("deterministic end t = {:.4}: x = {:?}", end.t_physical, end.x);
    println!("ensemble mean at end: {mean:?}");
    if name == DemoName::Logistic {
        let err = det
            .classical
            .iter()
            .map(|c| (c.x[0] - closed_form_logistic(0.01, c.t_physical)).abs())
            .fold(0.0, f64::max);
        println!("closed form at end: {:.6}, max deterministic error {err:.3e}", closed_form_logistic(0.01, end.t_physical));
    }
    println!("outputs in {}", dir.display());
}
