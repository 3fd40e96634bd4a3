//! Localization window from the unified parameter
//! `u_L(r, s) = γ B_f / |β_s − β_r|`.
//!
//! Population starting at `r` is predicted to stay within the states where
//! `u_L > 0.5`, restricted to the contiguous run that contains `r`: the
//! ladder only has nearest-neighbour transitions, so pockets of the level set
//! beyond a sub-threshold state have no path from the initial state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    self, AveragedDistribution, AveragingError, PropagationError, PropagationPlan,
    PropagationSettings, Representation,
};
use crate::exec::{self, Execution};
use crate::model::{self, LadderBasis, MoleculeSpec, PulseTrainSpec};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_FLOOR: f64 = 1e-3;
/// Pulses averaged at `γ = 1`; runs use `⌈budget / γ⌉`.
pub const DEFAULT_PULSE_BUDGET: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocalizationError {
    #[error("initial_j {initial_j} outside 0..={j_max}")]
    InitialOutOfRange { initial_j: usize, j_max: usize },
    #[error("threshold must be positive, got {0}")]
    Threshold(f64),
    #[error("floor must lie in (0, 1), got {0}")]
    Floor(f64),
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Model(#[from] model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnifiedParameter {
    /// `+∞` when `β_s = β_r`.
    pub value: f64,
    pub r: usize,
    pub s: usize,
}

impl UnifiedParameter {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

pub fn unified_parameter(r: usize, s: usize, mol: &MoleculeSpec, train: &PulseTrainSpec) -> UnifiedParameter {
    let gap = (model::beta(s, mol, train) - model::beta(r, mol, train)).abs();
    let value = if gap == 0.0 { f64::INFINITY } else { train.gamma * train.b_f / gap };
    UnifiedParameter { value, r, s }
}

/// `u_L(r, s)` for `s = 0..=j_max`.
pub fn unified_row(r: usize, mol: &MoleculeSpec, train: &PulseTrainSpec, j_max: usize) -> Vec<f64> {
    (0..=j_max).map(|s| unified_parameter(r, s, mol, train).value).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionSource {
    Predicted,
    Measured,
}

/// Closed interval `[j_lo, j_hi]` of rotational states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRegion {
    pub j_lo: usize,
    pub j_hi: usize,
    pub source: RegionSource,
    /// `u_L` threshold for predictions, probability floor for measurements.
    pub threshold: f64,
}

impl LocalizationRegion {
    pub fn contains(&self, j: usize) -> bool {
        (self.j_lo..=self.j_hi).contains(&j)
    }

    pub fn width(&self) -> usize {
        self.j_hi - self.j_lo + 1
    }
}

/// Maximal run of `true` in `mask` that contains `start`.
fn connected_run(mask: &[bool], start: usize) -> (usize, usize) {
    let mut lo = start;
    while lo > 0 && mask[lo - 1] {
        lo -= 1;
    }
    let mut hi = start;
    while hi + 1 < mask.len() && mask[hi + 1] {
        hi += 1;
    }
    (lo, hi)
}

/// Level set `{s : u_L > threshold}`; infinite values always belong.
pub fn level_set(row: &[f64], threshold: f64) -> Vec<bool> {
    row.iter().map(|&u| u > threshold).collect()
}

/// Region predicted from a precomputed `u_L` row.
pub fn predicted_from_row(row: &[f64], initial_j: usize, threshold: f64) -> LocalizationRegion {
    let (j_lo, j_hi) = connected_run(&level_set(row, threshold), initial_j);
    LocalizationRegion { j_lo, j_hi, source: RegionSource::Predicted, threshold }
}

pub fn predicted_region(
    initial_j: usize,
    mol: &MoleculeSpec,
    train: &PulseTrainSpec,
    j_max: usize,
    threshold: f64,
) -> Result<LocalizationRegion, LocalizationError> {
    if initial_j > j_max {
        return Err(LocalizationError::InitialOutOfRange { initial_j, j_max });
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(LocalizationError::Threshold(threshold));
    }
    Ok(predicted_from_row(&unified_row(initial_j, mol, train, j_max), initial_j, threshold))
}

/// Level-set states that lie outside the connected region.
pub fn isolated_states(row: &[f64], region: &LocalizationRegion) -> Vec<usize> {
    level_set(row, region.threshold)
        .iter()
        .enumerate()
        .filter(|&(j, &inside)| inside && !region.contains(j))
        .map(|(j, _)| j)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRegion {
    pub region: LocalizationRegion,
    /// States inside the region whose probability is below the floor. A
    /// nonempty list means the support is not contiguous.
    pub gaps: Vec<usize>,
}

impl MeasuredRegion {
    pub fn is_contiguous(&self) -> bool {
        self.gaps.is_empty()
    }
}

/// Smallest interval around the initial state outside of which every
/// relative probability is below `floor`.
pub fn measured_region(dist: &AveragedDistribution, floor: f64) -> Result<MeasuredRegion, LocalizationError> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(LocalizationError::Floor(floor));
    }
    let p = &dist.relative_probability;
    let above = |j: &usize| p[*j] >= floor;
    let j0 = dist.initial_j;
    let j_lo = (0..p.len()).find(above).map_or(j0, |j| j.min(j0));
    let j_hi = (0..p.len()).rev().find(above).map_or(j0, |j| j.max(j0));
    let gaps = (j_lo..=j_hi).filter(|j| !above(j)).collect();
    Ok(MeasuredRegion {
        region: LocalizationRegion { j_lo, j_hi, source: RegionSource::Measured, threshold: floor },
        gaps,
    })
}

/// Why a simulated grid point produced no measurement.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum PointFailure {
    #[error("propagation: {0}")]
    Propagation(String),
    #[error("averaging: {0}")]
    Averaging(String),
}

impl From<PropagationError> for PointFailure {
    fn from(e: PropagationError) -> Self {
        PointFailure::Propagation(e.to_string())
    }
}

impl From<AveragingError> for PointFailure {
    fn from(e: AveragingError) -> Self {
        PointFailure::Averaging(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPoint {
    pub distribution: AveragedDistribution,
    pub measured: MeasuredRegion,
    pub max_norm_drift: f64,
}

/// Simulation options for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSimulation {
    pub representation: Representation,
    /// Fixed step count; protocol defaults when `None`.
    pub steps_per_pulse: Option<u32>,
    /// Fixed pulse count; `⌈pulse_budget / γ⌉` when `None`.
    pub pulse_count: Option<u64>,
    pub pulse_budget: f64,
    pub norm_tolerance: Option<f64>,
    pub floor: f64,
    pub execution: Execution,
}

impl Default for SweepSimulation {
    fn default() -> Self {
        Self {
            representation: Representation::Rwa,
            steps_per_pulse: None,
            pulse_count: None,
            pulse_budget: DEFAULT_PULSE_BUDGET,
            norm_tolerance: None,
            floor: DEFAULT_FLOOR,
            execution: Execution::default(),
        }
    }
}

impl SweepSimulation {
    /// Propagation plan for one grid point.
    pub fn plan(
        &self,
        mol: &MoleculeSpec,
        train: &PulseTrainSpec,
        basis: &LadderBasis,
        initial_j: usize,
    ) -> PropagationPlan {
        let mut train = train.clone();
        train.pulse_count = self
            .pulse_count
            .unwrap_or_else(|| ((self.pulse_budget / train.gamma).ceil() as u64).max(1));
        let mut settings = PropagationSettings::for_run(self.representation, mol, &train);
        if let Some(steps) = self.steps_per_pulse {
            settings.steps_per_pulse = steps;
        }
        if let Some(tol) = self.norm_tolerance {
            settings.norm_tolerance = tol;
        }
        // sweeps only need the running mean; keep a snapshot per pulse
        settings.sample_stride = settings.steps_per_pulse;
        PropagationPlan { molecule: mol.clone(), train, basis: *basis, initial_j, settings }
    }
}

/// Propagate, average and read off the measured region.
pub fn simulate_point(plan: &PropagationPlan, floor: f64) -> Result<SimulatedPoint, PointFailure> {
    let traj = dynamics::propagate(plan)?;
    let distribution = dynamics::time_averaged_distribution(&traj, plan.initial_j)?;
    let measured = measured_region(&distribution, floor)
        .map_err(|e| PointFailure::Averaging(e.to_string()))?;
    Ok(SimulatedPoint { distribution, measured, max_norm_drift: traj.max_norm_drift })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SweepAxis {
    Gamma,
    /// `T_p / T_M` of the reference molecule at fixed `γ`.
    TpOverTm { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub train: PulseTrainSpec,
    pub u_row: Vec<f64>,
    pub predicted: LocalizationRegion,
    pub simulation: Option<Result<SimulatedPoint, PointFailure>>,
}

impl SweepPoint {
    pub fn measured(&self) -> Option<&MeasuredRegion> {
        match &self.simulation {
            Some(Ok(sim)) => Some(&sim.measured),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMap {
    pub axis: SweepAxis,
    pub initial_j: usize,
    pub j_max: usize,
    pub threshold: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepMap {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.axis_value).collect()
    }

    /// Grid value with the largest predicted upper boundary; ties go to the
    /// smallest grid value.
    pub fn argmax_predicted_upper(&self) -> Option<f64> {
        self.points
            .iter()
            .fold(None, |best: Option<&SweepPoint>, p| match best {
                Some(b) if b.predicted.j_hi >= p.predicted.j_hi => Some(b),
                _ => Some(p),
            })
            .map(|p| p.axis_value)
    }
}

fn check_grid(grid: &[f64]) -> Result<(), LocalizationError> {
    if grid.is_empty() {
        return Err(LocalizationError::Grid("grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(LocalizationError::Grid(format!("grid values must be > 0, got {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LocalizationError::Grid("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn run_sweep(
    axis: SweepAxis,
    initial_j: usize,
    mol: &MoleculeSpec,
    basis: &LadderBasis,
    trains: Vec<(f64, PulseTrainSpec)>,
    threshold: f64,
    simulate: Option<&SweepSimulation>,
) -> Result<SweepMap, LocalizationError> {
    let j_max = basis.j_max;
    if initial_j > j_max {
        return Err(LocalizationError::InitialOutOfRange { initial_j, j_max });
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(LocalizationError::Threshold(threshold));
    }
    if let Some(sim) = simulate {
        if !(sim.floor > 0.0 && sim.floor < 1.0) {
            return Err(LocalizationError::Floor(sim.floor));
        }
    }
    let execution = simulate.map_or(Execution::Sequential, |s| s.execution);
    let points = exec::map_ordered(&trains, execution, |(axis_value, train)| {
        let u_row = unified_row(initial_j, mol, train, j_max);
        let predicted = predicted_from_row(&u_row, initial_j, threshold);
        let simulation = simulate.map(|sim| simulate_point(&sim.plan(mol, train, basis, initial_j), sim.floor));
        SweepPoint { axis_value: *axis_value, train: train.clone(), u_row, predicted, simulation }
    });
    Ok(SweepMap { axis, initial_j, j_max, threshold, points })
}

/// Predicted (and optionally simulated) regions over a `γ` grid.
pub fn sweep_gamma(
    initial_j: usize,
    mol: &MoleculeSpec,
    template: &PulseTrainSpec,
    basis: &LadderBasis,
    gamma_grid: &[f64],
    threshold: f64,
    simulate: Option<&SweepSimulation>,
) -> Result<SweepMap, LocalizationError> {
    check_grid(gamma_grid)?;
    let trains = gamma_grid
        .iter()
        .map(|&g| template.with_gamma(g).map(|t| (g, t)))
        .collect::<Result<Vec<_>, _>>()?;
    run_sweep(SweepAxis::Gamma, initial_j, mol, basis, trains, threshold, simulate)
}

/// Predicted (and optionally simulated) regions over pulse intervals
/// `T_p = ratio · T_M(reference)` at fixed `γ`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_interval(
    initial_j: usize,
    mol: &MoleculeSpec,
    reference: &MoleculeSpec,
    template: &PulseTrainSpec,
    basis: &LadderBasis,
    tp_over_tm_grid: &[f64],
    gamma: f64,
    threshold: f64,
    simulate: Option<&SweepSimulation>,
) -> Result<SweepMap, LocalizationError> {
    check_grid(tp_over_tm_grid)?;
    let trains = tp_over_tm_grid
        .iter()
        .map(|&ratio| {
            PulseTrainSpec::synchronized(reference, ratio, gamma, template.n, template.pulse_count)
                .map(|t| (ratio, t))
        })
        .collect::<Result<Vec<_>, _>>()?;
    run_sweep(SweepAxis::TpOverTm { gamma }, initial_j, mol, basis, trains, threshold, simulate)
}

/// Prediction and simulation side by side for one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub u_row: Vec<f64>,
    pub predicted: LocalizationRegion,
    pub simulated: SimulatedPoint,
}

impl Comparison {
    /// `(lower, upper)` boundary offsets, measured minus predicted.
    pub fn boundary_offsets(&self) -> (i64, i64) {
        let m = &self.simulated.measured.region;
        (
            m.j_lo as i64 - self.predicted.j_lo as i64,
            m.j_hi as i64 - self.predicted.j_hi as i64,
        )
    }
}

pub fn compare(plan: &PropagationPlan, threshold: f64, floor: f64) -> Result<Comparison, PointFailure> {
    let u_row = unified_row(plan.initial_j, &plan.molecule, &plan.train, plan.basis.j_max);
    let predicted = predicted_from_row(&u_row, plan.initial_j, threshold);
    let simulated = simulate_point(plan, floor)?;
    Ok(Comparison { u_row, predicted, simulated })
}
