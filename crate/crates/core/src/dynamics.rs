//! Interaction-picture Schrödinger equation on the rotational ladder, in the
//! full-field and rotating-wave forms, propagated with fixed-step RK4.
//!
//! Both generators are tridiagonal and anti-Hermitian. A run starts from a
//! single rotational state, records sampled distributions, and accumulates
//! the per-state mean of `|C_J|²` over every integration point.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, LadderBasis, MoleculeSpec, PulseTrainSpec};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative detuning `|B_M − B_f| / B_f` below which a molecule counts as the
/// resonant species when picking default step counts.
pub const RESONANT_DETUNING: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("norm drift {drift:.3e} exceeds tolerance {tolerance:.1e} at t = {time}; increase steps_per_pulse")]
    NormDriftExceeded { drift: f64, tolerance: f64, time: f64 },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AveragingError {
    #[error("trajectory holds no samples")]
    Empty,
    #[error("initial_j {0} outside the trajectory basis")]
    OutOfBasis(usize),
    #[error("time-averaged maximum sits at J={argmax}, not at the initial state J={initial_j} (ratio {ratio:.4})")]
    MaxNotAtInitial { initial_j: usize, argmax: usize, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    pub t: f64,
}

impl StateVector {
    /// `C_J = δ_{J,j}` at `t = 0`.
    pub fn basis_state(dim: usize, j: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[j] = Complex64::new(1.0, 0.0);
        Self { amplitudes, t: 0.0 }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    FullField,
    #[default]
    Rwa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    pub representation: Representation,
    pub steps_per_pulse: u32,
    /// Keep a snapshot every `sample_stride` steps.
    pub sample_stride: u32,
    pub norm_tolerance: f64,
}

impl PropagationSettings {
    /// Step counts and error budgets of the reference protocol: RWA uses
    /// `10γ` (resonant) or `20γ` points per pulse with a `1e-6` norm budget,
    /// the full field `4000γ` or `8000γ` with `1e-3`.
    pub fn protocol(representation: Representation, gamma: f64, resonant: bool) -> Self {
        let (base, tolerance) = match representation {
            Representation::Rwa => (10.0, 1e-6),
            Representation::FullField => (4000.0, 1e-3),
        };
        let factor = if resonant { 1.0 } else { 2.0 };
        let steps_per_pulse = ((base * factor * gamma).ceil() as u32).max(1);
        // one snapshot per pulse; the running mean still sees every step
        Self { representation, steps_per_pulse, sample_stride: steps_per_pulse, norm_tolerance: tolerance }
    }

    /// Protocol defaults for this molecule and train.
    pub fn for_run(representation: Representation, mol: &MoleculeSpec, train: &PulseTrainSpec) -> Self {
        Self::protocol(representation, train.gamma, is_resonant(mol, train))
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        if self.steps_per_pulse < 1 {
            return Err(PropagationError::InvalidPlan("steps_per_pulse must be >= 1".into()));
        }
        if self.sample_stride < 1 {
            return Err(PropagationError::InvalidPlan("sample_stride must be >= 1".into()));
        }
        if !(self.norm_tolerance.is_finite() && self.norm_tolerance > 0.0) {
            return Err(PropagationError::InvalidPlan("norm_tolerance must be > 0".into()));
        }
        Ok(())
    }
}

pub fn is_resonant(mol: &MoleculeSpec, train: &PulseTrainSpec) -> bool {
    train.detuning(mol).abs() <= RESONANT_DETUNING * train.b_f
}

/// Default pulse count `⌈1000 / γ⌉`.
pub fn protocol_pulse_count(gamma: f64) -> u64 {
    ((1000.0 / gamma).ceil() as u64).max(1)
}

/// Time derivative of the amplitude vector.
pub trait Generator {
    fn dim(&self) -> usize;
    fn derivative(&mut self, t: f64, c: &[Complex64], out: &mut [Complex64]);
}

/// Dipole ratio `μ_J / μ0` per bond; bonds below `|M|` carry no coupling.
fn bond_dipoles(basis: &LadderBasis) -> Vec<f64> {
    (0..basis.j_max).map(|j| model::dipole_moment(j, basis, 1.0).unwrap_or(0.0)).collect()
}

/// Tridiagonal update `out_J = i [w_{J−1} C_{J−1} + conj(w_J) C_{J+1}]` where
/// `w_J` is the lower-diagonal bond weight.
fn apply_bonds(bonds: &[Complex64], c: &[Complex64], out: &mut [Complex64]) {
    let n = c.len();
    out[0] = I * bonds[0].conj() * c[1];
    for j in 1..n - 1 {
        out[j] = I * (bonds[j - 1] * c[j - 1] + bonds[j].conj() * c[j + 1]);
    }
    out[n - 1] = I * bonds[n - 2] * c[n - 2];
}

/// Rotating-wave generator: bonds `γ B_f (μ_J/μ0) e^{iα_J t}`.
#[derive(Debug, Clone)]
pub struct RwaGenerator {
    alphas: Vec<f64>,
    couplings: Vec<f64>,
    bonds: Vec<Complex64>,
    cached_t: f64,
}

impl RwaGenerator {
    pub fn new(mol: &MoleculeSpec, train: &PulseTrainSpec, basis: &LadderBasis) -> Self {
        let alphas = (0..basis.j_max).map(|j| model::alpha(j, mol, train)).collect();
        let couplings =
            bond_dipoles(basis).into_iter().map(|m| train.gamma * train.b_f * m).collect();
        Self {
            alphas,
            couplings,
            bonds: vec![Complex64::new(0.0, 0.0); basis.j_max],
            cached_t: f64::NAN,
        }
    }
}

impl Generator for RwaGenerator {
    fn dim(&self) -> usize {
        self.alphas.len() + 1
    }

    fn derivative(&mut self, t: f64, c: &[Complex64], out: &mut [Complex64]) {
        if t != self.cached_t {
            for ((bond, &a), &k) in self.bonds.iter_mut().zip(&self.alphas).zip(&self.couplings) {
                *bond = Complex64::from_polar(k, a * t);
            }
            self.cached_t = t;
        }
        apply_bonds(&self.bonds, c, out);
    }
}

/// Full-field generator: bonds `ε(t) μ_J e^{i 2π ν_J t}` with the comb field.
#[derive(Debug, Clone)]
pub struct FullFieldGenerator {
    omegas: Vec<f64>,
    couplings: Vec<f64>,
    bonds: Vec<Complex64>,
    train: PulseTrainSpec,
    cached_t: f64,
}

impl FullFieldGenerator {
    pub fn new(mol: &MoleculeSpec, train: &PulseTrainSpec, basis: &LadderBasis) -> Self {
        let omegas = (0..basis.j_max).map(|j| 2.0 * PI * model::transition_frequency(j, mol)).collect();
        let couplings = bond_dipoles(basis);
        Self {
            omegas,
            couplings,
            bonds: vec![Complex64::new(0.0, 0.0); basis.j_max],
            train: train.clone(),
            cached_t: f64::NAN,
        }
    }
}

impl Generator for FullFieldGenerator {
    fn dim(&self) -> usize {
        self.omegas.len() + 1
    }

    fn derivative(&mut self, t: f64, c: &[Complex64], out: &mut [Complex64]) {
        if t != self.cached_t {
            // μ0 cancels between ε(t) and μ_J
            let field = model::field_amplitude(t, &self.train, 1.0);
            for ((bond, &w), &m) in self.bonds.iter_mut().zip(&self.omegas).zip(&self.couplings) {
                *bond = Complex64::from_polar(field * m, w * t);
            }
            self.cached_t = t;
        }
        apply_bonds(&self.bonds, c, out);
    }
}

fn check_dim(state: &StateVector, basis: &LadderBasis) {
    assert_eq!(state.amplitudes.len(), basis.dim(), "state dimension must equal j_max + 1");
}

/// `dC/dt` of the full-field equation.
pub fn rhs_full(
    t: f64,
    state: &StateVector,
    mol: &MoleculeSpec,
    train: &PulseTrainSpec,
    basis: &LadderBasis,
) -> Vec<Complex64> {
    check_dim(state, basis);
    let mut out = vec![Complex64::new(0.0, 0.0); basis.dim()];
    FullFieldGenerator::new(mol, train, basis).derivative(t, &state.amplitudes, &mut out);
    out
}

/// `dC/dt` of the rotating-wave equation.
pub fn rhs_rwa(
    t: f64,
    state: &StateVector,
    mol: &MoleculeSpec,
    train: &PulseTrainSpec,
    basis: &LadderBasis,
) -> Vec<Complex64> {
    check_dim(state, basis);
    let mut out = vec![Complex64::new(0.0, 0.0); basis.dim()];
    RwaGenerator::new(mol, train, basis).derivative(t, &state.amplitudes, &mut out);
    out
}

/// Classic fourth-order Runge-Kutta with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// Advance `c` from `t` to `t + h`; `t_mid` and `t_end` are passed in so
    /// callers can reuse bit-identical times across steps.
    pub fn step<G: Generator>(
        &mut self,
        g: &mut G,
        c: &mut [Complex64],
        t: f64,
        t_mid: f64,
        t_end: f64,
        h: f64,
    ) {
        let half = 0.5 * h;
        g.derivative(t, c, &mut self.k1);
        for ((x, &c0), &k) in self.tmp.iter_mut().zip(c.iter()).zip(&self.k1) {
            *x = c0 + k * half;
        }
        g.derivative(t_mid, &self.tmp, &mut self.k2);
        for ((x, &c0), &k) in self.tmp.iter_mut().zip(c.iter()).zip(&self.k2) {
            *x = c0 + k * half;
        }
        g.derivative(t_mid, &self.tmp, &mut self.k3);
        for ((x, &c0), &k) in self.tmp.iter_mut().zip(c.iter()).zip(&self.k3) {
            *x = c0 + k * h;
        }
        g.derivative(t_end, &self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for (j, x) in c.iter_mut().enumerate() {
            *x += (self.k1[j] + (self.k2[j] + self.k3[j]) * 2.0 + self.k4[j]) * sixth;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPlan {
    pub molecule: MoleculeSpec,
    pub train: PulseTrainSpec,
    pub basis: LadderBasis,
    pub initial_j: usize,
    pub settings: PropagationSettings,
}

impl PropagationPlan {
    /// Plan with protocol step counts and a basis truncated at the comb edge.
    pub fn protocol(
        molecule: MoleculeSpec,
        train: PulseTrainSpec,
        initial_j: usize,
        representation: Representation,
    ) -> Self {
        let settings = PropagationSettings::for_run(representation, &molecule, &train);
        let basis = LadderBasis::for_train(&train);
        Self { molecule, train, basis, initial_j, settings }
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        let invalid = |e: model::ModelError| PropagationError::InvalidPlan(e.to_string());
        self.molecule.validate().map_err(invalid)?;
        self.train.validate().map_err(invalid)?;
        self.basis.validate().map_err(invalid)?;
        self.settings.validate()?;
        if self.initial_j > self.basis.j_max {
            return Err(PropagationError::InvalidPlan(format!(
                "initial_j {} outside basis 0..={}",
                self.initial_j, self.basis.j_max
            )));
        }
        if self.initial_j < self.basis.j_min() {
            return Err(PropagationError::InvalidPlan(format!(
                "initial_j {} below |M| = {}",
                self.initial_j,
                self.basis.j_min()
            )));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.train.pulse_count * self.settings.steps_per_pulse as u64
    }

    pub fn step_size(&self) -> f64 {
        self.train.pulse_interval() / self.settings.steps_per_pulse as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `|C_J|²` per recorded sample.
    pub distributions: Vec<Vec<f64>>,
    /// `|1 − Σ|C_J|²|` per recorded sample.
    pub norm_drift: Vec<f64>,
    /// Largest drift seen at any integration point.
    pub max_norm_drift: f64,
    /// Sum of `|C_J|²` over every integration point, snapshots or not.
    pub probability_sum: Vec<f64>,
    pub points_accumulated: u64,
    pub pulses: u64,
    pub settings: PropagationSettings,
    #[serde(skip)]
    pub final_amplitudes: Vec<Complex64>,
}

impl TrajectoryRecord {
    /// Record built from explicit samples, each counted once in the mean.
    pub fn from_samples(
        times: Vec<f64>,
        distributions: Vec<Vec<f64>>,
        settings: PropagationSettings,
    ) -> Self {
        let dim = distributions.first().map_or(0, Vec::len);
        let mut probability_sum = vec![0.0; dim];
        for d in &distributions {
            for (acc, &p) in probability_sum.iter_mut().zip(d) {
                *acc += p;
            }
        }
        let norm_drift: Vec<f64> =
            distributions.iter().map(|d| (1.0 - d.iter().sum::<f64>()).abs()).collect();
        Self {
            max_norm_drift: norm_drift.iter().copied().fold(0.0, f64::max),
            points_accumulated: distributions.len() as u64,
            times,
            distributions,
            norm_drift,
            probability_sum,
            pulses: 0,
            settings,
            final_amplitudes: Vec::new(),
        }
    }

    pub fn mean_distribution(&self) -> Vec<f64> {
        let n = self.points_accumulated.max(1) as f64;
        self.probability_sum.iter().map(|&s| s / n).collect()
    }

    /// Mean over the recorded snapshots with `t >= from_time`, for
    /// re-averaging with a warm-up cut.
    pub fn snapshot_mean_after(&self, from_time: f64) -> Option<Vec<f64>> {
        let picked: Vec<&Vec<f64>> = self
            .times
            .iter()
            .zip(&self.distributions)
            .filter(|(&t, _)| t >= from_time)
            .map(|(_, d)| d)
            .collect();
        let first = picked.first()?;
        let mut acc = vec![0.0; first.len()];
        for d in &picked {
            for (a, &p) in acc.iter_mut().zip(d.iter()) {
                *a += p;
            }
        }
        let n = picked.len() as f64;
        Some(acc.into_iter().map(|a| a / n).collect())
    }
}

/// Integrate `plan` from `C_J = δ_{J,initial_j}` over the whole train.
pub fn propagate(plan: &PropagationPlan) -> Result<TrajectoryRecord, PropagationError> {
    plan.validate()?;
    match plan.settings.representation {
        Representation::Rwa => {
            run(plan, RwaGenerator::new(&plan.molecule, &plan.train, &plan.basis))
        }
        Representation::FullField => {
            run(plan, FullFieldGenerator::new(&plan.molecule, &plan.train, &plan.basis))
        }
    }
}

fn run<G: Generator>(plan: &PropagationPlan, mut g: G) -> Result<TrajectoryRecord, PropagationError> {
    let dim = plan.basis.dim();
    let settings = plan.settings;
    let steps = plan.total_steps();
    let h = plan.step_size();
    let stride = settings.sample_stride as u64;

    let mut c = StateVector::basis_state(dim, plan.initial_j).amplitudes;
    let mut rk = Rk4::new(dim);
    let mut probs = vec![0.0; dim];
    let mut probability_sum = vec![0.0; dim];
    let capacity = (steps / stride + 1) as usize;
    let mut times = Vec::with_capacity(capacity);
    let mut distributions = Vec::with_capacity(capacity);
    let mut norm_drift = Vec::with_capacity(capacity);
    let mut max_norm_drift = 0.0f64;

    let mut record = |n: u64, c: &[Complex64]| -> Result<(), PropagationError> {
        let mut total = 0.0;
        for ((p, acc), a) in probs.iter_mut().zip(probability_sum.iter_mut()).zip(c) {
            *p = a.norm_sqr();
            *acc += *p;
            total += *p;
        }
        let drift = (1.0 - total).abs();
        max_norm_drift = max_norm_drift.max(drift);
        let t = n as f64 * h;
        if drift > settings.norm_tolerance {
            return Err(PropagationError::NormDriftExceeded {
                drift,
                tolerance: settings.norm_tolerance,
                time: t,
            });
        }
        if n.is_multiple_of(stride) {
            times.push(t);
            distributions.push(probs.clone());
            norm_drift.push(drift);
        }
        Ok(())
    };

    record(0, &c)?;
    for n in 0..steps {
        let t = n as f64 * h;
        let t_mid = (n as f64 + 0.5) * h;
        let t_end = (n + 1) as f64 * h;
        rk.step(&mut g, &mut c, t, t_mid, t_end, h);
        record(n + 1, &c)?;
    }

    Ok(TrajectoryRecord {
        times,
        distributions,
        norm_drift,
        max_norm_drift,
        probability_sum,
        points_accumulated: steps + 1,
        pulses: plan.train.pulse_count,
        settings,
        final_amplitudes: c,
    })
}

/// Time-averaged distribution relative to the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedDistribution {
    pub relative_probability: Vec<f64>,
    pub initial_j: usize,
    pub pulses_averaged: u64,
}

impl AveragedDistribution {
    pub fn j_max(&self) -> usize {
        self.relative_probability.len() - 1
    }
}

/// Per-state mean of `|C_J|²`, scaled so the initial state reads 1. Fails
/// when any other state has a larger mean, since the scale would then no
/// longer be the maximum.
pub fn time_averaged_distribution(
    traj: &TrajectoryRecord,
    initial_j: usize,
) -> Result<AveragedDistribution, AveragingError> {
    if traj.points_accumulated == 0 || traj.probability_sum.is_empty() {
        return Err(AveragingError::Empty);
    }
    let mean = traj.mean_distribution();
    if initial_j >= mean.len() {
        return Err(AveragingError::OutOfBasis(initial_j));
    }
    let reference = mean[initial_j];
    let (argmax, &peak) = mean
        .iter()
        .enumerate()
        .fold((initial_j, &reference), |best, (j, p)| if *p > *best.1 { (j, p) } else { best });
    if argmax != initial_j {
        return Err(AveragingError::MaxNotAtInitial { initial_j, argmax, ratio: peak / reference });
    }
    Ok(AveragedDistribution {
        relative_probability: mean.iter().map(|&p| p / reference).collect(),
        initial_j,
        pulses_averaged: traj.pulses,
    })
}
