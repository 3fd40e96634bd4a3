//! Run a resolved config end to end: compute, write data files, then the
//! manifest. The command-line front end is a thin layer over these.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use super::config::{ResolvedRun, RunConfig};
use super::emit::{self, Derived, EmittedFile, NormSummary, RunManifest};
use super::{ConfigError, OutputError};
use crate::dynamics::{self, AveragingError};
use crate::exec::Execution;
use crate::localization::{self, LocalizationError, LocalizationRegion, PointFailure, SweepMap, SweepSimulation};
use crate::model;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl CommandError {
    /// 2 for config/validation, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(ConfigError::Io(_)) => 4,
            CommandError::Config(_) => 2,
            CommandError::Numerical(_) => 3,
            CommandError::Output(_) => 4,
        }
    }
}

impl From<LocalizationError> for CommandError {
    fn from(e: LocalizationError) -> Self {
        CommandError::Config(ConfigError::Validation { field: "sweep".into(), reason: e.to_string() })
    }
}

/// Files written by a command and a short human-readable report.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub report: String,
}

fn derived(run: &ResolvedRun) -> Derived {
    Derived {
        b_f: run.train.b_f,
        pulse_interval: run.train.pulse_interval(),
        reference_period: model::classical_period(&run.reference),
        delta_b: run.train.detuning(&run.molecule),
        peak_field: run.train.peak_field(run.molecule.mu0),
        pulse_count: run.train.pulse_count,
        steps_per_pulse: run.settings.steps_per_pulse,
    }
}

fn finish(
    command: &str,
    config: &RunConfig,
    run: &ResolvedRun,
    started: Instant,
    norm: Option<NormSummary>,
    files: Vec<EmittedFile>,
    report: String,
) -> Result<Outcome, CommandError> {
    let mut manifest = RunManifest::new(command, config.clone(), derived(run));
    manifest.norm = norm;
    manifest.files = files;
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    emit::write_manifest(&run.output_dir, &manifest)?;
    Ok(Outcome { dir: run.output_dir.clone(), manifest, report })
}

fn describe(label: &str, r: &LocalizationRegion) -> String {
    format!("{label}: J in [{}, {}]\n", r.j_lo, r.j_hi)
}

/// `u_L` row and predicted region; no propagation.
pub fn predict(config: &RunConfig) -> Result<Outcome, CommandError> {
    let started = Instant::now();
    let run = config.resolve()?;
    let u_row = localization::unified_row(run.initial_j, &run.molecule, &run.train, run.basis.j_max);
    let predicted = localization::predicted_from_row(&u_row, run.initial_j, run.threshold);
    let file = emit::emit_file(
        &run.output_dir,
        "prediction.csv",
        &emit::distribution_csv(run.train.gamma, &u_row, None, &predicted, None),
    )?;
    let mut report = describe("predicted", &predicted);
    let isolated = localization::isolated_states(&u_row, &predicted);
    if !isolated.is_empty() {
        writeln!(report, "unreachable states above threshold: {isolated:?}").unwrap();
    }
    finish("predict", config, &run, started, None, vec![file], report)
}

fn averaging_failure(e: AveragingError) -> CommandError {
    CommandError::Numerical(e.to_string())
}

/// One trajectory, its time average and the measured region.
pub fn simulate(config: &RunConfig) -> Result<Outcome, CommandError> {
    let started = Instant::now();
    let run = config.resolve()?;
    let plan = run.plan();
    let traj = dynamics::propagate(&plan).map_err(|e| CommandError::Numerical(e.to_string()))?;
    let dist = dynamics::time_averaged_distribution(&traj, run.initial_j).map_err(averaging_failure)?;
    let measured = localization::measured_region(&dist, run.floor)
        .map_err(|e| CommandError::Numerical(e.to_string()))?;
    let u_row = localization::unified_row(run.initial_j, &run.molecule, &run.train, run.basis.j_max);
    let predicted = localization::predicted_from_row(&u_row, run.initial_j, run.threshold);

    let time_unit = model::classical_period(&run.reference);
    let files = vec![
        emit::emit_file(&run.output_dir, "trajectory.csv", &emit::trajectory_csv(&traj, time_unit))?,
        emit::emit_distribution(
            &run.output_dir,
            run.train.gamma,
            &u_row,
            Some(&dist),
            &predicted,
            Some(&measured.region),
        )?,
    ];

    let mut report = describe("measured", &measured.region);
    if !measured.is_contiguous() {
        writeln!(report, "warning: states below the floor inside the region: {:?}", measured.gaps).unwrap();
    }
    writeln!(report, "max norm drift: {:.3e}", traj.max_norm_drift).unwrap();
    let norm = NormSummary { max_norm_drift: traj.max_norm_drift, tolerance: run.settings.norm_tolerance };
    finish("simulate", config, &run, started, Some(norm), files, report)
}

/// Predicted and measured regions side by side.
pub fn compare(config: &RunConfig) -> Result<Outcome, CommandError> {
    let started = Instant::now();
    let run = config.resolve()?;
    let cmp = localization::compare(&run.plan(), run.threshold, run.floor).map_err(|e| match e {
        PointFailure::Propagation(msg) | PointFailure::Averaging(msg) => CommandError::Numerical(msg),
    })?;
    let sim = &cmp.simulated;
    let file = emit::emit_distribution(
        &run.output_dir,
        run.train.gamma,
        &cmp.u_row,
        Some(&sim.distribution),
        &cmp.predicted,
        Some(&sim.measured.region),
    )?;
    let (lo, hi) = cmp.boundary_offsets();
    let mut report = describe("predicted", &cmp.predicted);
    report.push_str(&describe("measured", &sim.measured.region));
    writeln!(report, "offsets (measured - predicted): lower {lo:+}, upper {hi:+}").unwrap();
    if !sim.measured.is_contiguous() {
        writeln!(report, "warning: states below the floor inside the region: {:?}", sim.measured.gaps).unwrap();
    }
    let norm = NormSummary { max_norm_drift: sim.max_norm_drift, tolerance: run.settings.norm_tolerance };
    finish("compare", config, &run, started, Some(norm), vec![file], report)
}

fn sweep_simulation(config: &RunConfig, run: &ResolvedRun, execution: Execution) -> Option<SweepSimulation> {
    config.sweep.simulate.then_some(SweepSimulation {
        representation: config.propagation.representation,
        steps_per_pulse: config.propagation.steps_per_pulse,
        pulse_count: config.train.pulse_count,
        pulse_budget: config.sweep.pulse_budget,
        norm_tolerance: config.propagation.norm_tolerance,
        floor: run.floor,
        execution,
    })
}

fn sweep_report(map: &SweepMap) -> (String, Option<NormSummary>, usize) {
    let mut report = String::new();
    let mut drift: Option<f64> = None;
    let mut diverged = 0;
    for p in &map.points {
        write!(report, "{:<12} predicted [{}, {}]", p.axis_value, p.predicted.j_lo, p.predicted.j_hi).unwrap();
        match &p.simulation {
            Some(Ok(sim)) => {
                let m = &sim.measured.region;
                write!(report, "  measured [{}, {}]", m.j_lo, m.j_hi).unwrap();
                drift = Some(drift.map_or(sim.max_norm_drift, |d| d.max(sim.max_norm_drift)));
            }
            Some(Err(e)) => {
                write!(report, "  {e}").unwrap();
                if matches!(e, PointFailure::Propagation(_)) {
                    diverged += 1;
                }
            }
            None => {}
        }
        report.push('\n');
    }
    if let Some(best) = map.argmax_predicted_upper() {
        writeln!(report, "largest predicted upper boundary at {best}").unwrap();
    }
    (report, drift.map(|d| NormSummary { max_norm_drift: d, tolerance: f64::NAN }), diverged)
}

fn finish_sweep(
    command: &str,
    config: &RunConfig,
    run: &ResolvedRun,
    started: Instant,
    map: &SweepMap,
) -> Result<Outcome, CommandError> {
    let files = emit::emit_sweep_map(&run.output_dir, map)?;
    let (report, mut norm, diverged) = sweep_report(map);
    if let Some(n) = norm.as_mut() {
        n.tolerance = config.propagation.norm_tolerance.unwrap_or(run.settings.norm_tolerance);
    }
    let outcome = finish(command, config, run, started, norm, files, report)?;
    if diverged > 0 {
        return Err(CommandError::Numerical(format!(
            "{diverged} grid point(s) exceeded the norm budget; see {}",
            outcome.dir.join("sweep_summary.csv").display()
        )));
    }
    Ok(outcome)
}

fn required_grid<'a>(grid: &'a Option<Vec<f64>>, field: &str) -> Result<&'a [f64], CommandError> {
    grid.as_deref().ok_or_else(|| {
        CommandError::Config(ConfigError::Validation { field: field.into(), reason: "grid is required".into() })
    })
}

/// Regions over `sweep.gammas`.
pub fn sweep_gamma(config: &RunConfig, execution: Execution) -> Result<Outcome, CommandError> {
    let started = Instant::now();
    let run = config.resolve()?;
    let grid = required_grid(&config.sweep.gammas, "sweep.gammas")?;
    let sim = sweep_simulation(config, &run, execution);
    let map = localization::sweep_gamma(
        run.initial_j,
        &run.molecule,
        &run.train,
        &run.basis,
        grid,
        run.threshold,
        sim.as_ref(),
    )?;
    finish_sweep("sweep-gamma", config, &run, started, &map)
}

/// Regions over `sweep.tp_over_tm` at `train.gamma`.
pub fn sweep_interval(config: &RunConfig, execution: Execution) -> Result<Outcome, CommandError> {
    let started = Instant::now();
    let run = config.resolve()?;
    let grid = required_grid(&config.sweep.tp_over_tm, "sweep.tp_over_tm")?;
    let sim = sweep_simulation(config, &run, execution);
    let map = localization::sweep_interval(
        run.initial_j,
        &run.molecule,
        &run.reference,
        &run.train,
        &run.basis,
        grid,
        run.train.gamma,
        run.threshold,
        sim.as_ref(),
    )?;
    finish_sweep("sweep-interval", config, &run, started, &map)
}

/// Names of the data files a manifest lists, for comparisons across runs.
pub fn data_files(dir: &Path) -> Result<Vec<String>, OutputError> {
    Ok(emit::read_manifest(dir)?.files.into_iter().map(|f| f.name).collect())
}
