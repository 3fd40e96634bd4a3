//! Rotational population dynamics of diatomic molecules driven by a periodic
//! train of resonant pulses, and a closed-form predictor for the window of
//! rotational states the population stays confined to.
//!
//! - [`model`]: energies, transition lines, dipoles, the comb field, `α_J`, `β_J`
//! - [`dynamics`]: full-field and rotating-wave RK4 propagation, time averages
//! - [`spectral`]: eigensystem of the hopping matrix, resonant propagator
//! - [`localization`]: unified parameter `u_L`, predicted/measured regions, sweeps
//! - [`io`]: presets, TOML run configs, CSV output and manifests

pub mod dynamics;
pub mod exec;
pub mod io;
pub mod localization;
pub mod model;
pub mod spectral;

pub use dynamics::{
    propagate, time_averaged_distribution, AveragedDistribution, PropagationPlan,
    PropagationSettings, Representation, StateVector, TrajectoryRecord,
};
pub use exec::Execution;
pub use localization::{
    measured_region, predicted_region, sweep_gamma, sweep_interval, unified_parameter,
    LocalizationRegion, SweepMap, SweepSimulation,
};
pub use model::{DipoleModel, LadderBasis, MoleculeSpec, PulseTrainSpec};
