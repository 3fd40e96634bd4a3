//! Run configuration: a TOML file with flat sections, resolved into the
//! model, train, basis and propagation settings.
//!
//! ```toml
//! [molecule]
//! preset = "KCl-39-35"
//!
//! [train]
//! gamma = 1.0
//! n = 100
//! tp_over_tm = 1.0
//! tp_sync = "KCl-39-37"
//!
//! [run]
//! initial_j = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{presets, ConfigError};
use crate::dynamics::{self, PropagationPlan, PropagationSettings, Representation};
use crate::localization::{DEFAULT_FLOOR, DEFAULT_PULSE_BUDGET, DEFAULT_THRESHOLD};
use crate::model::{self, DipoleModel, LadderBasis, MoleculeSpec, PulseTrainSpec};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ROTLOC_OUTPUT_DIR";
pub const FALLBACK_OUTPUT_DIR: &str = "rotloc-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub molecule: MoleculeConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub run: RunSection,
}

/// Either a preset name or inline constants (inline values override the
/// preset's).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dv_over_bm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
}

impl Default for MoleculeConfig {
    fn default() -> Self {
        Self { preset: Some("KCl-39-37".into()), name: None, b_m: None, dv_over_bm: None, mu0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub n: usize,
    /// `⌈1000 / γ⌉` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_count: Option<u64>,
    /// Pulse interval in units of the reference classical period.
    pub tp_over_tm: f64,
    /// Preset whose classical period sets the reference; the driven molecule
    /// itself when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tp_sync: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { gamma: 1.0, n: 100, pulse_count: None, tp_over_tm: 1.0, tp_sync: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    /// Defaults to the comb size `n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
    #[serde(default)]
    pub m: i32,
    #[serde(default)]
    pub dipole_model: DipoleModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default)]
    pub representation: Representation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_pulse: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub threshold: f64,
    pub floor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, floor: DEFAULT_FLOOR }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tp_over_tm: Option<Vec<f64>>,
    #[serde(default)]
    pub simulate: bool,
    pub pulse_budget: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { gammas: None, tp_over_tm: None, simulate: false, pulse_budget: DEFAULT_PULSE_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub initial_j: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { initial_j: 5, output_dir: None }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub molecule: MoleculeSpec,
    pub reference: MoleculeSpec,
    pub train: PulseTrainSpec,
    pub basis: LadderBasis,
    pub settings: PropagationSettings,
    pub initial_j: usize,
    pub threshold: f64,
    pub floor: f64,
    pub output_dir: PathBuf,
}

impl ResolvedRun {
    pub fn plan(&self) -> PropagationPlan {
        PropagationPlan {
            molecule: self.molecule.clone(),
            train: self.train.clone(),
            basis: self.basis,
            initial_j: self.initial_j,
            settings: self.settings,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), reason: reason.into() }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a positive number, got {v}")))
    }
}

fn preset(field: &str, name: &str) -> Result<MoleculeSpec, ConfigError> {
    presets::find(name)
        .map(|p| p.molecule())
        .ok_or_else(|| invalid(field, format!("unknown preset {name:?}")))
}

fn grid(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(invalid(field, "grid is empty"));
    }
    for &v in values {
        positive(field, v)?;
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(field, "grid must be strictly increasing"));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.resolve()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn resolve_molecule(&self) -> Result<MoleculeSpec, ConfigError> {
        let m = &self.molecule;
        let base = match &m.preset {
            Some(name) => Some(preset("molecule.preset", name)?),
            None => None,
        };
        let name = m
            .name
            .clone()
            .or_else(|| base.as_ref().map(|b| b.name.clone()))
            .ok_or_else(|| invalid("molecule.name", "needs a preset or a name"))?;
        let b_m = m
            .b_m
            .or(base.as_ref().map(|b| b.b_m))
            .ok_or_else(|| invalid("molecule.b_m", "needs a preset or b_m"))?;
        let dv = m
            .dv_over_bm
            .or(base.as_ref().map(|b| b.dv_over_bm))
            .ok_or_else(|| invalid("molecule.dv_over_bm", "needs a preset or dv_over_bm"))?;
        positive("molecule.b_m", b_m)?;
        if name.trim().is_empty() {
            return Err(invalid("molecule.name", "must be nonempty"));
        }
        if !(0.0..1e-3).contains(&dv) {
            return Err(invalid("molecule.dv_over_bm", format!("must lie in [0, 1e-3), got {dv}")));
        }
        let mu0 = m.mu0.unwrap_or(1.0);
        positive("molecule.mu0", mu0)?;
        Ok(MoleculeSpec { name, b_m, dv_over_bm: dv, mu0 })
    }

    pub fn resolve(&self) -> Result<ResolvedRun, ConfigError> {
        let molecule = self.resolve_molecule()?;
        let reference = match &self.train.tp_sync {
            Some(name) => preset("train.tp_sync", name)?,
            None => molecule.clone(),
        };

        let t = &self.train;
        positive("train.gamma", t.gamma)?;
        positive("train.tp_over_tm", t.tp_over_tm)?;
        if t.n < 1 {
            return Err(invalid("train.n", "must be >= 1"));
        }
        let pulse_count = t.pulse_count.unwrap_or_else(|| dynamics::protocol_pulse_count(t.gamma));
        if pulse_count < 1 {
            return Err(invalid("train.pulse_count", "must be >= 1"));
        }
        let train = PulseTrainSpec::synchronized(&reference, t.tp_over_tm, t.gamma, t.n, pulse_count)
            .map_err(|e| invalid("train", e.to_string()))?;

        let b = &self.basis;
        let j_max = b.j_max.unwrap_or(t.n);
        let basis = LadderBasis::new(j_max, b.m, b.dipole_model).map_err(|e| match e {
            model::ModelError::Basis(reason) if reason.contains("|M|") => invalid("basis.m", reason),
            other => invalid("basis.j_max", other.to_string()),
        })?;

        let p = &self.propagation;
        let mut settings = PropagationSettings::for_run(p.representation, &molecule, &train);
        if let Some(steps) = p.steps_per_pulse {
            if steps < 1 {
                return Err(invalid("propagation.steps_per_pulse", "must be >= 1"));
            }
            settings.steps_per_pulse = steps;
            settings.sample_stride = steps;
        }
        if let Some(stride) = p.sample_stride {
            if stride < 1 {
                return Err(invalid("propagation.sample_stride", "must be >= 1"));
            }
            settings.sample_stride = stride;
        }
        if let Some(tol) = p.norm_tolerance {
            positive("propagation.norm_tolerance", tol)?;
            settings.norm_tolerance = tol;
        }

        let a = &self.analysis;
        positive("analysis.threshold", a.threshold)?;
        if !(a.floor > 0.0 && a.floor < 1.0) {
            return Err(invalid("analysis.floor", format!("must lie in (0, 1), got {}", a.floor)));
        }

        let s = &self.sweep;
        if let Some(g) = &s.gammas {
            grid("sweep.gammas", g)?;
        }
        if let Some(g) = &s.tp_over_tm {
            grid("sweep.tp_over_tm", g)?;
        }
        positive("sweep.pulse_budget", s.pulse_budget)?;

        let initial_j = self.run.initial_j;
        if initial_j > j_max {
            return Err(invalid("run.initial_j", format!("{initial_j} outside basis 0..={j_max}")));
        }
        if initial_j < basis.j_min() {
            return Err(invalid("run.initial_j", format!("{initial_j} below |M| = {}", basis.j_min())));
        }

        Ok(ResolvedRun {
            molecule,
            reference,
            train,
            basis,
            settings,
            initial_j,
            threshold: a.threshold,
            floor: a.floor,
            output_dir: self.output_dir(),
        })
    }

    /// Configured directory, else `$ROTLOC_OUTPUT_DIR`, else `rotloc-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.run
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml_str(&text)
}
