//! Molecular constants, the multiple-cosine pulse train and the detuning
//! phase rates that drive the rotational ladder.
//!
//! Frequencies are in units where the reference rotational constant is 1;
//! times are in the reciprocal unit. With a train synchronized to the
//! reference molecule, `B_f = 1` and `T_p = 0.5`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid molecule: {0}")]
    Molecule(String),
    #[error("invalid pulse train: {0}")]
    Train(String),
    #[error("invalid basis: {0}")]
    Basis(String),
    #[error("no transition from J={j} for M={m}")]
    NoTransition { j: usize, m: i32 },
}

/// Rotational constants of one isotopic species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub name: String,
    /// Rotational constant `B_M`.
    pub b_m: f64,
    /// Centrifugal distortion ratio `D_v / B_M`.
    pub dv_over_bm: f64,
    /// Permanent dipole. Only enters the physical field amplitude.
    pub mu0: f64,
}

impl MoleculeSpec {
    pub fn new(name: impl Into<String>, b_m: f64, dv_over_bm: f64) -> Result<Self, ModelError> {
        let mol = Self { name: name.into(), b_m, dv_over_bm, mu0: 1.0 };
        mol.validate()?;
        Ok(mol)
    }

    pub fn with_mu0(mut self, mu0: f64) -> Result<Self, ModelError> {
        self.mu0 = mu0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.name.trim().is_empty() {
            return Err(ModelError::Molecule("name must be nonempty".into()));
        }
        if !(self.b_m.is_finite() && self.b_m > 0.0) {
            return Err(ModelError::Molecule(format!("b_m must be > 0, got {}", self.b_m)));
        }
        if !(self.dv_over_bm >= 0.0 && self.dv_over_bm < 1e-3) {
            return Err(ModelError::Molecule(format!(
                "dv_over_bm must lie in [0, 1e-3), got {}",
                self.dv_over_bm
            )));
        }
        if !(self.mu0.is_finite() && self.mu0 > 0.0) {
            return Err(ModelError::Molecule(format!("mu0 must be > 0, got {}", self.mu0)));
        }
        Ok(())
    }

    /// Centrifugal distortion constant `D_v`.
    pub fn d_v(&self) -> f64 {
        self.dv_over_bm * self.b_m
    }
}

/// Periodic train of transform-limited pulses, written as a comb of `N`
/// cosines plus a DC term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainSpec {
    /// Scaled field intensity.
    pub gamma: f64,
    /// Comb frequency constant `B_f`.
    pub b_f: f64,
    /// Highest J reached by the comb.
    pub n: usize,
    pub pulse_count: u64,
}

impl PulseTrainSpec {
    pub fn new(gamma: f64, b_f: f64, n: usize, pulse_count: u64) -> Result<Self, ModelError> {
        let train = Self { gamma, b_f, n, pulse_count };
        train.validate()?;
        Ok(train)
    }

    /// Train whose pulse interval is `tp_over_tm` times the classical period
    /// of `reference`.
    pub fn synchronized(
        reference: &MoleculeSpec,
        tp_over_tm: f64,
        gamma: f64,
        n: usize,
        pulse_count: u64,
    ) -> Result<Self, ModelError> {
        if !(tp_over_tm.is_finite() && tp_over_tm > 0.0) {
            return Err(ModelError::Train(format!("tp_over_tm must be > 0, got {tp_over_tm}")));
        }
        Self::new(gamma, reference.b_m / tp_over_tm, n, pulse_count)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ModelError::Train(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.b_f.is_finite() && self.b_f > 0.0) {
            return Err(ModelError::Train(format!("b_f must be > 0, got {}", self.b_f)));
        }
        if self.n < 1 {
            return Err(ModelError::Train("n must be >= 1".into()));
        }
        if self.pulse_count < 1 {
            return Err(ModelError::Train("pulse_count must be >= 1".into()));
        }
        Ok(())
    }

    /// Pulse interval `T_p = 1 / (2 B_f)`.
    pub fn pulse_interval(&self) -> f64 {
        0.5 / self.b_f
    }

    pub fn duration(&self) -> f64 {
        self.pulse_count as f64 * self.pulse_interval()
    }

    /// Peak field `(2N + 1) γ B_f / μ0`.
    pub fn peak_field(&self, mu0: f64) -> f64 {
        self.gamma * self.b_f / mu0 * (2 * self.n + 1) as f64
    }

    /// `B_M - B_f`.
    pub fn detuning(&self, mol: &MoleculeSpec) -> f64 {
        mol.b_m - self.b_f
    }

    /// Same train at a different intensity.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ModelError> {
        Self::new(gamma, self.b_f, self.n, self.pulse_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DipoleModel {
    /// `μ_J = μ0 / 2` for every J.
    #[default]
    ConstantHalf,
    /// Full `(J, M)` dependence of the transition moment.
    ExactJm,
}

/// Truncated rotational ladder `J = 0..=j_max` at fixed `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderBasis {
    pub j_max: usize,
    pub m: i32,
    pub dipole_model: DipoleModel,
}

impl LadderBasis {
    pub fn new(j_max: usize, m: i32, dipole_model: DipoleModel) -> Result<Self, ModelError> {
        let basis = Self { j_max, m, dipole_model };
        basis.validate()?;
        Ok(basis)
    }

    /// Basis sized to the comb, `M = 0`, constant dipoles.
    pub fn for_train(train: &PulseTrainSpec) -> Self {
        Self { j_max: train.n, m: 0, dipole_model: DipoleModel::ConstantHalf }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.j_max < 1 {
            return Err(ModelError::Basis("j_max must be >= 1".into()));
        }
        if self.m.unsigned_abs() as usize >= self.j_max {
            return Err(ModelError::Basis(format!(
                "|M| must be < j_max ({}), got {}",
                self.j_max, self.m
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.j_max + 1
    }

    /// Lowest J that exists for this M.
    pub fn j_min(&self) -> usize {
        self.m.unsigned_abs() as usize
    }
}

/// `E_J = 2π B_M J(J+1) − 2π D_v J²(J+1)²`.
pub fn rotational_energy(j: usize, mol: &MoleculeSpec) -> f64 {
    let x = (j * (j + 1)) as f64;
    2.0 * PI * (mol.b_m * x - mol.d_v() * x * x)
}

/// `ν_J = 2 B_M (J+1) − 4 D_v (J+1)³`, the `J → J+1` line.
pub fn transition_frequency(j: usize, mol: &MoleculeSpec) -> f64 {
    let k = (j + 1) as f64;
    2.0 * mol.b_m * k - 4.0 * mol.d_v() * k * k * k
}

/// `T_M = 1 / (2 B_M)`.
pub fn classical_period(mol: &MoleculeSpec) -> f64 {
    0.5 / mol.b_m
}

/// Transition dipole for `J → J+1` in units of the supplied `mu0`.
pub fn dipole_moment(j: usize, basis: &LadderBasis, mu0: f64) -> Result<f64, ModelError> {
    let m = basis.m.unsigned_abs() as usize;
    if m > j {
        return Err(ModelError::NoTransition { j, m: basis.m });
    }
    Ok(match basis.dipole_model {
        DipoleModel::ConstantHalf => 0.5 * mu0,
        DipoleModel::ExactJm => {
            let k = (j + 1) as f64;
            let mm = (m * m) as f64;
            let jf = j as f64;
            mu0 * ((k * k - mm) / ((2.0 * jf + 1.0) * (2.0 * jf + 3.0))).sqrt()
        }
    })
}

/// Sum `1 + 2 Σ_{m=1}^{N} cos(m x)`, the Dirichlet kernel.
pub(crate) fn comb_kernel(x: f64, n: usize) -> f64 {
    let half = 0.5 * x;
    let s = half.sin();
    if s.abs() > 1e-4 {
        ((n as f64 + 0.5) * x).sin() / s
    } else {
        // near the pulse peaks the quotient loses precision
        let mut acc = 1.0;
        for m in 1..=n {
            acc += 2.0 * (m as f64 * x).cos();
        }
        acc
    }
}

/// Field of the multiple-cosine train,
/// `ε(t) = (γ B_f / μ0) [1 + 2 Σ_{j=0}^{N−1} cos(2π·2B_f(j+1) t)]`.
pub fn field_amplitude(t: f64, train: &PulseTrainSpec, mu0: f64) -> f64 {
    // reduce to one period first so large t keeps its accuracy
    let tp = train.pulse_interval();
    let phase = (t / tp).fract();
    let x = 2.0 * PI * phase;
    train.gamma * train.b_f / mu0 * comb_kernel(x, train.n)
}

/// `β_J = 2π {ΔB J(J+1) − D_v J²(J+1)²}` with `ΔB = B_M − B_f`.
pub fn beta(j: usize, mol: &MoleculeSpec, train: &PulseTrainSpec) -> f64 {
    let x = (j * (j + 1)) as f64;
    2.0 * PI * (train.detuning(mol) * x - mol.d_v() * x * x)
}

/// `α_J = 2π {2ΔB (J+1) − 4 D_v (J+1)³} = β_{J+1} − β_J`.
pub fn alpha(j: usize, mol: &MoleculeSpec, train: &PulseTrainSpec) -> f64 {
    let k = (j + 1) as f64;
    2.0 * PI * (2.0 * train.detuning(mol) * k - 4.0 * mol.d_v() * k * k * k)
}
