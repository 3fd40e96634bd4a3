//! Closed-form spectral machinery for the nearest-neighbour hopping matrix
//! `V` (ones on the first off-diagonals, zeros elsewhere).
//!
//! The RWA Hamiltonian factors as `H(t) = −(γB_f/2) T(t) V T̃(t)` with
//! `T(t) = diag(e^{iβ_J t})`, and `V = Y Λ Yᵀ` has the sine eigenbasis
//! `λ_k = 2 cos(kπ/(n+1))`, `y_jk = √(2/(n+1)) sin(jkπ/(n+1))` for 1-based
//! `j, k` and matrix size `n`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{self, MoleculeSpec, PulseTrainSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("β_{s} equals β_{r}: the series coefficient is undefined, use the resonant propagator")]
    DegenerateDetuning { r: usize, s: usize },
    #[error("index {index} outside a ladder of size {size}")]
    OutOfRange { index: usize, size: usize },
}

/// The `size × size` hopping matrix. Entries are implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoppingMatrix {
    pub size: usize,
}

impl HoppingMatrix {
    pub fn new(size: usize) -> Self {
        Self { size }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    }
}

/// Eigenvalues (strictly decreasing) and orthonormal eigenvectors of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub lambdas: Vec<f64>,
    /// Row-major `size × size`; column `k` is the eigenvector for `lambdas[k]`.
    y: Vec<f64>,
    size: usize,
}

impl SpectralDecomposition {
    pub fn size(&self) -> usize {
        self.size
    }

    /// `y_jk`: component `j` of eigenvector `k`.
    pub fn y(&self, j: usize, k: usize) -> f64 {
        self.y[j * self.size + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.y[j * self.size..(j + 1) * self.size]
    }
}

/// Closed-form eigensystem of the hopping matrix of the given size.
pub fn decompose_hopping(size: usize) -> SpectralDecomposition {
    assert!(size >= 1, "hopping matrix needs at least one state");
    let denom = size + 1;
    let period = 2 * denom;
    let angle = |m: usize| PI * (m % period) as f64 / denom as f64;
    let norm = (2.0 / denom as f64).sqrt();

    let lambdas = (1..=size).map(|k| 2.0 * angle(k).cos()).collect();
    let mut y = vec![0.0; size * size];
    for j in 0..size {
        for k in 0..size {
            // integer reduction keeps the sine argument small
            y[j * size + k] = norm * angle((j + 1) * (k + 1)).sin();
        }
    }
    SpectralDecomposition { lambdas, y, size }
}

fn cache() -> &'static RwLock<HashMap<usize, Arc<SpectralDecomposition>>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<SpectralDecomposition>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Shared decomposition for `size`, computed once per process.
pub fn cached_decomposition(size: usize) -> Arc<SpectralDecomposition> {
    if let Some(found) = cache().read().expect("spectral cache poisoned").get(&size) {
        return Arc::clone(found);
    }
    let mut map = cache().write().expect("spectral cache poisoned");
    Arc::clone(map.entry(size).or_insert_with(|| Arc::new(decompose_hopping(size))))
}

/// `⟨s| exp(+i (τ/2) V) |r⟩` with `τ = γ B_f t`: the exact amplitude under
/// fully resonant driving.
pub fn resonant_propagator(size: usize, r: usize, s: usize, tau: f64) -> Complex64 {
    assert!(r < size && s < size, "state index outside ladder of size {size}");
    let dec = cached_decomposition(size);
    let (row_r, row_s) = (dec.row(r), dec.row(s));
    dec.lambdas
        .iter()
        .zip(row_r.iter().zip(row_s))
        .map(|(&lam, (&yr, &ys))| Complex64::from_polar(ys * yr, 0.5 * tau * lam))
        .sum()
}

/// Full resonant propagator column for initial state `r`.
pub fn resonant_column(size: usize, r: usize, tau: f64) -> Vec<Complex64> {
    let dec = cached_decomposition(size);
    let phases: Vec<Complex64> = dec
        .lambdas
        .iter()
        .zip(dec.row(r))
        .map(|(&lam, &yr)| Complex64::from_polar(yr, 0.5 * tau * lam))
        .collect();
    (0..size)
        .map(|s| dec.row(s).iter().zip(&phases).map(|(&ys, &p)| p * ys).sum())
        .collect()
}

/// Partial sums of the Taylor series of the resonant propagator,
/// `Σ_{n ≤ n_max} Σ_k (iτλ_k/2)ⁿ/n! · y_sk y_rk`.
pub fn resonant_series(size: usize, r: usize, s: usize, tau: f64, n_max: usize) -> Vec<Complex64> {
    assert!(r < size && s < size, "state index outside ladder of size {size}");
    let dec = cached_decomposition(size);
    let mut terms: Vec<Complex64> =
        dec.row(s).iter().zip(dec.row(r)).map(|(&ys, &yr)| Complex64::new(ys * yr, 0.0)).collect();
    let mut partial = Vec::with_capacity(n_max + 1);
    let mut acc: Complex64 = terms.iter().sum();
    partial.push(acc);
    for n in 1..=n_max {
        for (term, &lam) in terms.iter_mut().zip(&dec.lambdas) {
            *term *= Complex64::new(0.0, 0.5 * tau * lam / n as f64);
        }
        acc += terms.iter().sum::<Complex64>();
        partial.push(acc);
    }
    partial
}

/// Partial sums `n = 0..=n_max` of the time-order-invariant amplitude series
/// from `J = r` to `J = s`,
/// `Σ_n Σ_k (γB_f / (2(β_s − β_r)))ⁿ (1/n!) e^{in(β_s−β_r)t} y_sk λ_kⁿ y_rk`.
///
/// This series does not converge to the true amplitude; only its `n = 1`
/// coefficient carries physical meaning. It is provided for diagnostics.
pub fn tentative_series(
    r: usize,
    s: usize,
    t: f64,
    n_max: usize,
    mol: &MoleculeSpec,
    train: &PulseTrainSpec,
    size: usize,
) -> Result<Vec<Complex64>, SpectralError> {
    for index in [r, s] {
        if index >= size {
            return Err(SpectralError::OutOfRange { index, size });
        }
    }
    let dbeta = model::beta(s, mol, train) - model::beta(r, mol, train);
    if dbeta == 0.0 {
        return Err(SpectralError::DegenerateDetuning { r, s });
    }
    let dec = cached_decomposition(size);
    let ratio = train.gamma * train.b_f / (2.0 * dbeta);
    let step = Complex64::from_polar(ratio, dbeta * t);

    let mut terms: Vec<Complex64> =
        dec.row(s).iter().zip(dec.row(r)).map(|(&ys, &yr)| Complex64::new(ys * yr, 0.0)).collect();
    let mut acc: Complex64 = terms.iter().sum();
    let mut partial = vec![acc];
    for n in 1..=n_max {
        let factor = step / n as f64;
        for (term, &lam) in terms.iter_mut().zip(&dec.lambdas) {
            *term *= factor * lam;
        }
        acc += terms.iter().sum::<Complex64>();
        partial.push(acc);
    }
    Ok(partial)
}

/// Dense row-major complex matrix. Used for checks, never for propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub size: usize,
    pub data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, data: vec![Complex64::new(0.0, 0.0); size * size] }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.size + j] = v;
    }
}

/// `T(t) = diag(e^{iβ_J t})` for `J = 0..size`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagonal {
    pub betas: Vec<f64>,
    pub t: f64,
}

impl PhaseDiagonal {
    pub fn new(t: f64, mol: &MoleculeSpec, train: &PulseTrainSpec, size: usize) -> Self {
        Self { betas: (0..size).map(|j| model::beta(j, mol, train)).collect(), t }
    }

    pub fn entry(&self, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.betas[j] * self.t)
    }

    /// Entry of the conjugate `T̃(t)`.
    pub fn conj_entry(&self, j: usize) -> Complex64 {
        self.entry(j).conj()
    }
}

/// `−(γB_f/2) T(t) Y Λ Yᵀ T̃(t)` assembled densely through the factorization.
pub fn rwa_hamiltonian_assembled(
    t: f64,
    mol: &MoleculeSpec,
    train: &PulseTrainSpec,
    size: usize,
) -> DenseMatrix {
    assert!(size >= 2, "RWA Hamiltonian needs at least two states");
    let dec = cached_decomposition(size);
    let phases = PhaseDiagonal::new(t, mol, train, size);
    let scale = -0.5 * train.gamma * train.b_f;
    let mut h = DenseMatrix::zeros(size);
    for i in 0..size {
        for j in 0..size {
            let v: f64 =
                (0..size).map(|k| dec.y(i, k) * dec.lambdas[k] * dec.y(j, k)).sum();
            h.set(i, j, phases.entry(i) * phases.conj_entry(j) * (scale * v));
        }
    }
    h
}

/// Same Hamiltonian written directly with the bond phases `e^{±iα_J t}`.
pub fn rwa_hamiltonian_direct(
    t: f64,
    mol: &MoleculeSpec,
    train: &PulseTrainSpec,
    size: usize,
) -> DenseMatrix {
    let scale = -0.5 * train.gamma * train.b_f;
    let mut h = DenseMatrix::zeros(size);
    for j in 0..size - 1 {
        let phase = Complex64::from_polar(scale, model::alpha(j, mol, train) * t);
        h.set(j + 1, j, phase);
        h.set(j, j + 1, phase.conj());
    }
    h
}
