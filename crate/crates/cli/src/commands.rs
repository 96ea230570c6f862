use std::fs;
use std::path::{Path, PathBuf};

use qnlode_core::analysis::{branch_scaling_sweep, diagnostics, DiagnosticsSeries};
use qnlode_core::artifact::{PipelineArtifact, TOOL_VERSION};
use qnlode_core::mapping::{map_system, MapOptions, MappedSystem};
use qnlode_core::poly::parse_system;
use qnlode_core::quantum::{MeasurementMode, MeasurementModel};
use qnlode_core::trajectory::{
    derive_seed, estimate_cost, run_ensemble, SimulationConfig, Simulator, TrajectoryResult,
};

use crate::output::*;
use crate::{out_dir, AnalyzeArgs, CliError, CostArgs, MapArgs, MapFlags, RunFlags, SimulateArgs, SweepArgs};

pub const ARTIFACT_FILE: &str = "artifact.json";

/// Fallbacks used when a [`RunFlags`] field is absent.
#[derive(Debug, Clone, Copy)]
pub struct RunDefaults {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub mode: MeasurementMode,
    pub k: usize,
    pub s: Option<f64>,
    pub stride: Option<usize>,
}

impl Default for RunDefaults {
    fn default() -> Self {
        Self {
            dt: None,
            t_final: None,
            mode: MeasurementMode::Exact,
            k: 1,
            s: None,
            stride: None,
        }
    }
}

pub fn resolve_run(
    flags: &RunFlags,
    defaults: RunDefaults,
    art: &PipelineArtifact,
    x0: &[f64],
) -> Result<RunConfig, CliError> {
    let dt = flags
        .dt
        .or(defaults.dt)
        .ok_or_else(|| CliError::Usage("--dt is required".into()))?;
    let t_final = flags
        .t_final
        .or(defaults.t_final)
        .ok_or_else(|| CliError::Usage("--t-final is required".into()))?;
    let mode = flags.mode.map(Into::into).unwrap_or(defaults.mode);
    let seed = flags.seed.unwrap_or(0);
    let s = match (flags.s, flags.m) {
        (Some(s), _) => Some(s),
        (None, Some(_)) => None,
        (None, None) => defaults.s,
    };
    let m = match (s, flags.m) {
        _ if mode == MeasurementMode::Exact => 0.0,
        (Some(s), _) => MeasurementModel::from_rate(mode, s, dt, seed).shots,
        (None, Some(m)) => m,
        (None, None) => return Err(CliError::Usage(format!("--s or --m is required in {mode:?} mode"))),
    };
    if x0.len() != art.original_n_vars {
        return Err(CliError::Usage(format!(
            "--x0 has {} components, system has {}",
            x0.len(),
            art.original_n_vars
        )));
    }
    let mut rc = RunConfig {
        x0: x0.to_vec(),
        c: art.c,
        q: art.q,
        dt,
        t_final,
        ensemble_size: flags.k.unwrap_or(defaults.k),
        mode,
        s: if mode == MeasurementMode::Exact { None } else { s },
        m,
        seed,
        stride: 1,
    };
    let mut cfg = sim_config(&rc);
    cfg.record_stride = flags.stride.or(defaults.stride);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    rc.stride = cfg.stride();
    Ok(rc)
}

pub fn sim_config(rc: &RunConfig) -> SimulationConfig {
    let model = MeasurementModel {
        mode: rc.mode,
        shots: rc.m,
        rng_seed: rc.seed,
    };
    let mut cfg = SimulationConfig::new(rc.dt, rc.t_final, model);
    cfg.ensemble_size = rc.ensemble_size;
    cfg.record_stride = Some(rc.stride);
    cfg
}

pub fn map_file(path: &Path, flags: &MapFlags) -> Result<(PipelineArtifact, MappedSystem), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let sys = parse_system(&text).map_err(|e| CliError::Pipeline(format!("{}:{e}", path.display())))?;
    let opts = MapOptions {
        c: flags.c,
        degree: flags.degree,
        merge_pairs: flags.merge_pairs,
    };
    let mapped = map_system(&sys, &opts)
        .map_err(|e| CliError::Pipeline(format!("stage {}: {e}", e.stage())))?;
    Ok((PipelineArtifact::new(&sys, &mapped, &opts), mapped))
}

pub fn write_artifact(dir: &Path, art: &PipelineArtifact) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(ARTIFACT_FILE);
    fs::write(&path, art.to_json() + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn print_map_summary(art: &PipelineArtifact, mapped: &MappedSystem) {
    let reduced = mapped.reduced.tensor();
    let dense = (art.grouped_dim as f64).powi(4);
    println!(
        "variables {} (homogenized {}), degree {}, grouped variables {}, qubits {}, pairs {} (raw {}), reduced tensor nnz {} ({:.3e} dense fraction)",
        art.original_n_vars,
        art.base_dim,
        art.q,
        art.grouped_dim,
        art.state_dim.trailing_zeros(),
        art.pairs.len(),
        art.provenance.raw_pair_count,
        reduced.nnz(),
        reduced.nnz() as f64 / dense
    );
}

pub fn map(a: &MapArgs) -> Result<(), CliError> {
    let (art, mapped) = map_file(&a.system, &a.flags)?;
    let path = write_artifact(&out_dir(a.out.as_ref()), &art)?;
    print_map_summary(&art, &mapped);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn load_artifact(path: &Path) -> Result<PipelineArtifact, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "artifact {} not found; create one with `qnlode map <system>`",
            path.display()
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    PipelineArtifact::from_json(&text).map_err(|e| CliError::Pipeline(format!("{}: {e}", path.display())))
}

pub fn simulate_manifest(artifact: &Path, x0: &[f64], flags: &RunFlags, defaults: RunDefaults) -> Result<RunManifest, CliError> {
    let art = load_artifact(artifact)?;
    let run = resolve_run(flags, defaults, &art, x0)?;
    Ok(RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        command: "simulate".into(),
        inputs: vec![InputFile::hash("artifact", artifact)?],
        run: Some(run),
        threshold: None,
        s_values: Vec::new(),
    })
}

pub struct SimulationOutput {
    pub runs: Vec<TrajectoryResult>,
    pub failures: usize,
}

fn manifest_artifact(manifest: &RunManifest) -> Result<(PipelineArtifact, RunConfig), CliError> {
    let input = manifest
        .input("artifact")
        .ok_or_else(|| CliError::Usage("manifest lists no artifact".into()))?;
    let bytes = fs::read(&input.path).map_err(|e| CliError::io(&input.path, e))?;
    if sha256_hex(&bytes) != input.sha256 {
        return Err(CliError::Pipeline(format!(
            "{} does not match the manifest hash",
            input.path.display()
        )));
    }
    let art = load_artifact(&input.path)?;
    let run = manifest
        .run
        .clone()
        .ok_or_else(|| CliError::Usage("manifest has no run configuration".into()))?;
    Ok((art, run))
}

pub fn run_simulation(manifest: &RunManifest, dir: &Path) -> Result<SimulationOutput, CliError> {
    let (art, run) = manifest_artifact(manifest)?;
    let sim = Simulator::from_artifact(&art).map_err(|e| CliError::Pipeline(e.to_string()))?;
    let cfg = sim_config(&run);
    ensure_dir(dir)?;
    let hash = manifest.write(dir)?;
    let results = run_ensemble(&sim, &run.x0, &cfg, run.seed).map_err(|e| CliError::Simulation(e.to_string()))?;
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => {
                write_trajectory(&dir.join(format!("trajectory_{k:03}.csv")), &hash, &t)?;
                runs.push(t);
            }
            Err(e) => failed.push((k, derive_seed(run.seed, k as u64), e.to_string())),
        }
    }
    if !failed.is_empty() {
        write_failures(&dir.join("failures.csv"), &hash, &failed)?;
    }
    println!(
        "{} of {} trajectories succeeded, {} records each, in {}",
        runs.len(),
        run.ensemble_size,
        runs.first().map_or(0, TrajectoryResult::len),
        dir.display()
    );
    Ok(SimulationOutput {
        runs,
        failures: failed.len(),
    })
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let manifest = match (&a.manifest, &a.artifact) {
        (Some(p), _) => {
            let m = RunManifest::load(p)?;
            if m.command != "simulate" {
                return Err(CliError::Usage(format!("{} is a {} manifest", p.display(), m.command)));
            }
            m
        }
        (None, Some(art)) => simulate_manifest(art, &a.x0, &a.run, RunDefaults::default())?,
        (None, None) => return Err(CliError::Usage("an artifact or --manifest is required".into())),
    };
    let out = run_simulation(&manifest, &out_dir(a.out.as_ref()))?;
    match out.failures {
        0 => Ok(()),
        f => Err(CliError::Simulation(format!(
            "{f} of {} trajectories failed; see failures.csv",
            f + out.runs.len()
        ))),
    }
}

pub fn print_diagnostics(d: &DiagnosticsSeries) {
    let smax = d.entropy.iter().cloned().fold(0.0, f64::max);
    let tmax = d.trace_distance.iter().cloned().fold(0.0, f64::max);
    match d.branch_time {
        Some(t) => println!("branch time t' = {t}"),
        None => println!("no branch point (threshold {} of {:.4})", d.threshold_fraction, d.max_entropy),
    }
    println!(
        "max entropy {smax:.6}, max trace distance {tmax:.6}, entropy-error correlation {}",
        d.entropy_error_correlation()
            .map_or_else(|| "undefined".to_string(), |c| format!("{c:.4}"))
    );
}

pub fn run_analysis(
    ensemble: &Path,
    deterministic: &Path,
    threshold: f64,
    dir: &Path,
) -> Result<DiagnosticsSeries, CliError> {
    let det_name = fs::canonicalize(deterministic).map_err(|e| CliError::io(deterministic, e))?;
    let files: Vec<PathBuf> = trajectory_files(ensemble)?
        .into_iter()
        .filter(|p| fs::canonicalize(p).ok().as_ref() != Some(&det_name))
        .collect();
    if files.is_empty() {
        return Err(CliError::Pipeline(format!("no trajectory files in {}", ensemble.display())));
    }
    let det = read_trajectory(deterministic)?;
    let runs = files.iter().map(|p| read_trajectory(p)).collect::<Result<Vec<_>, _>>()?;
    let mut inputs = vec![InputFile::hash("deterministic", deterministic)?];
    for p in &files {
        inputs.push(InputFile::hash("member", p)?);
    }
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        command: "analyze".into(),
        inputs,
        run: None,
        threshold: Some(threshold),
        s_values: Vec::new(),
    };
    let d = diagnostics(&runs, &det, threshold).map_err(|e| CliError::Simulation(e.to_string()))?;
    ensure_dir(dir)?;
    let hash = manifest.write(dir)?;
    write_diagnostics(&dir.join("diagnostics.csv"), &hash, &d)?;
    Ok(d)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let dir = out_dir(a.out.as_ref());
    let d = run_analysis(&a.ensemble, &a.deterministic, a.threshold, &dir)?;
    println!("{} members, {} records", fs_count(&a.ensemble, &a.deterministic)?, d.times.len());
    print_diagnostics(&d);
    println!("wrote {}", dir.join("diagnostics.csv").display());
    Ok(())
}

fn fs_count(ensemble: &Path, deterministic: &Path) -> Result<usize, CliError> {
    let det = fs::canonicalize(deterministic).ok();
    Ok(trajectory_files(ensemble)?
        .iter()
        .filter(|p| fs::canonicalize(p).ok() != det)
        .count())
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let art = load_artifact(&a.artifact)?;
    let defaults = RunDefaults {
        mode: MeasurementMode::Gaussian,
        k: 10,
        s: a.s_values.first().copied(),
        ..RunDefaults::default()
    };
    let mut run = resolve_run(&a.run, defaults, &art, &a.x0)?;
    if run.mode == MeasurementMode::Exact {
        return Err(CliError::Usage("sweep needs --mode shot or gaussian".into()));
    }
    run.s = None;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        command: "sweep".into(),
        inputs: vec![InputFile::hash("artifact", &a.artifact)?],
        run: Some(run.clone()),
        threshold: Some(a.threshold),
        s_values: a.s_values.clone(),
    };
    let sim = Simulator::from_artifact(&art).map_err(|e| CliError::Pipeline(e.to_string()))?;
    let rows = branch_scaling_sweep(&sim, &run.x0, &a.s_values, &sim_config(&run), run.seed, a.threshold)
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    let dir = out_dir(a.out.as_ref());
    ensure_dir(&dir)?;
    let hash = manifest.write(&dir)?;
    write_sweep(&dir.join("sweep.csv"), &hash, &rows)?;
    for r in &rows {
        println!(
            "s {:e}: branch {}, failures {}, correlation {}",
            r.s,
            r.branch_time.map_or_else(|| "none".into(), |t| t.to_string()),
            r.failures,
            r.correlation.map_or_else(|| "undefined".into(), |c| format!("{c:.4}"))
        );
    }
    Ok(())
}

/// Scientific notation at 12 significant digits.
fn sci(v: f64) -> String {
    let r: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{r:e}")
}

pub fn print_cost(pairs: usize, t_final: f64, dt: f64, m: f64, epsilon: Option<f64>) -> Result<(), CliError> {
    let r = estimate_cost(pairs as f64, t_final, dt, m, epsilon).map_err(CliError::Usage)?;
    println!("pairs M                  {}", r.pairs);
    println!("total time T             {}", r.total_time);
    println!("dt                       {}", r.dt);
    println!("measurements per step m  {}", r.shots);
    println!("time steps               {}", sci(r.steps));
    println!("measurements (states)    {}", sci(r.measurements));
    println!("mean evolution time      {}", r.mean_evolution_time);
    println!("evolution steps          {}", sci(r.simulation_steps));
    println!("measurements at eps={}  {}", sci(r.epsilon), sci(r.epsilon_measurements));
    Ok(())
}

pub fn cost(a: &CostArgs) -> Result<(), CliError> {
    let pairs = match (&a.artifact, a.pairs) {
        (Some(p), _) => load_artifact(p)?.pairs.len(),
        (None, Some(n)) => n,
        (None, None) => return Err(CliError::Usage("--pairs or --artifact is required".into())),
    };
    let m = match (a.s, a.m) {
        (Some(s), _) => s * a.dt,
        (None, Some(m)) => m,
        (None, None) => return Err(CliError::Usage("--s or --m is required".into())),
    };
    print_cost(pairs, a.t_final, a.dt, m, a.epsilon)
}
