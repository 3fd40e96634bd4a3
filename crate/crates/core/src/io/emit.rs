//! Deterministic CSV output and the run manifest.
//!
//! Data rows use a fixed column order,
//! `grid_value,j,relative_probability,u_l,predicted,measured`, with floats in
//! 17 significant digits. Every file is written to a temporary sibling and
//! renamed into place; the manifest goes last and lists a SHA-256 digest for
//! each data file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::OutputError;
use crate::dynamics::{AveragedDistribution, TrajectoryRecord};
use crate::localization::{LocalizationRegion, SweepAxis, SweepMap};

pub const DATA_HEADER: &str = "grid_value,j,relative_probability,u_l,predicted,measured";
pub const MANIFEST_NAME: &str = "manifest.json";

/// 17 significant digits; infinities as `inf`.
pub fn fmt_float(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

fn flag(region: Option<&LocalizationRegion>, j: usize) -> &'static str {
    match region {
        Some(r) if r.contains(j) => "1",
        Some(_) => "0",
        None => "",
    }
}

/// One block of data rows for a single grid value.
pub fn push_rows(
    out: &mut String,
    grid_value: f64,
    u_row: &[f64],
    distribution: Option<&AveragedDistribution>,
    predicted: &LocalizationRegion,
    measured: Option<&LocalizationRegion>,
) {
    let grid = fmt_float(grid_value);
    for (j, &u) in u_row.iter().enumerate() {
        let p = distribution.map_or(String::new(), |d| fmt_float(d.relative_probability[j]));
        writeln!(
            out,
            "{grid},{j},{p},{},{},{}",
            fmt_float(u),
            flag(Some(predicted), j),
            flag(measured, j)
        )
        .expect("writing to a String cannot fail");
    }
}

pub fn distribution_csv(
    grid_value: f64,
    u_row: &[f64],
    distribution: Option<&AveragedDistribution>,
    predicted: &LocalizationRegion,
    measured: Option<&LocalizationRegion>,
) -> String {
    let mut out = format!("{DATA_HEADER}\n");
    push_rows(&mut out, grid_value, u_row, distribution, predicted, measured);
    out
}

pub fn sweep_csv(map: &SweepMap) -> String {
    let mut out = format!("{DATA_HEADER}\n");
    for p in &map.points {
        let (dist, measured) = match &p.simulation {
            Some(Ok(sim)) => (Some(&sim.distribution), Some(&sim.measured.region)),
            _ => (None, None),
        };
        push_rows(&mut out, p.axis_value, &p.u_row, dist, &p.predicted, measured);
    }
    out
}

/// Per-point summary of a sweep: boundaries and failure notes.
pub fn sweep_summary_csv(map: &SweepMap) -> String {
    let axis = match map.axis {
        SweepAxis::Gamma => "gamma",
        SweepAxis::TpOverTm { .. } => "tp_over_tm",
    };
    let mut out = format!("{axis},predicted_lo,predicted_hi,measured_lo,measured_hi,max_norm_drift,status\n");
    for p in &map.points {
        let (mlo, mhi, drift, status) = match &p.simulation {
            None => (String::new(), String::new(), String::new(), "predicted".to_string()),
            Some(Ok(sim)) => (
                sim.measured.region.j_lo.to_string(),
                sim.measured.region.j_hi.to_string(),
                fmt_float(sim.max_norm_drift),
                if sim.measured.is_contiguous() { "ok".into() } else { "non-contiguous".into() },
            ),
            Some(Err(e)) => (String::new(), String::new(), String::new(), format!("failed: {e}").replace(',', ";")),
        };
        writeln!(
            out,
            "{},{},{},{mlo},{mhi},{drift},{status}",
            fmt_float(p.axis_value),
            p.predicted.j_lo,
            p.predicted.j_hi
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Snapshots in wide form: `time,norm_drift,p_0,...,p_jmax`, with times
/// divided by `time_unit`.
pub fn trajectory_csv(traj: &TrajectoryRecord, time_unit: f64) -> String {
    let dim = traj.distributions.first().map_or(0, Vec::len);
    let mut out = String::from("time,norm_drift");
    for j in 0..dim {
        write!(out, ",p_{j}").expect("writing to a String cannot fail");
    }
    out.push('\n');
    for ((t, drift), d) in traj.times.iter().zip(&traj.norm_drift).zip(&traj.distributions) {
        out.push_str(&fmt_float(*t / time_unit));
        out.push(',');
        out.push_str(&fmt_float(*drift));
        for p in d {
            out.push(',');
            out.push_str(&fmt_float(*p));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write via a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let io_err = |e: std::io::Error| OutputError::Io(format!("{}: {e}", path.display()));
    let file_name = path
        .file_name()
        .ok_or_else(|| OutputError::Io(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

/// Write `contents` as `dir/name` and describe it for the manifest.
pub fn emit_file(dir: &Path, name: &str, contents: &str) -> Result<EmittedFile, OutputError> {
    fs::create_dir_all(dir).map_err(|e| OutputError::Io(format!("{}: {e}", dir.display())))?;
    write_atomic(&dir.join(name), contents.as_bytes())?;
    Ok(EmittedFile { name: name.into(), sha256: sha256_hex(contents.as_bytes()), bytes: contents.len() as u64 })
}

pub fn emit_distribution(
    dir: &Path,
    grid_value: f64,
    u_row: &[f64],
    distribution: Option<&AveragedDistribution>,
    predicted: &LocalizationRegion,
    measured: Option<&LocalizationRegion>,
) -> Result<EmittedFile, OutputError> {
    emit_file(dir, "distribution.csv", &distribution_csv(grid_value, u_row, distribution, predicted, measured))
}

pub fn emit_sweep_map(dir: &Path, map: &SweepMap) -> Result<Vec<EmittedFile>, OutputError> {
    Ok(vec![
        emit_file(dir, "sweep.csv", &sweep_csv(map))?,
        emit_file(dir, "sweep_summary.csv", &sweep_summary_csv(map))?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub b_f: f64,
    pub pulse_interval: f64,
    pub reference_period: f64,
    pub delta_b: f64,
    pub peak_field: f64,
    pub pulse_count: u64,
    pub steps_per_pulse: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSummary {
    pub max_norm_drift: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub units: String,
    pub config: RunConfig,
    pub derived: Derived,
    /// Only field that differs between identical runs.
    pub wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormSummary>,
    pub files: Vec<EmittedFile>,
}

pub const UNITS: &str = "frequencies in units of the reference B_M (B_f = 1 when T_p = T_M); \
                         trajectory times in units of T_M of the reference molecule; \
                         derived times in units of 1/B_M (T_M = 0.5)";

impl RunManifest {
    pub fn new(command: &str, config: RunConfig, derived: Derived) -> Self {
        Self {
            tool: "rotloc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            units: UNITS.into(),
            config,
            derived,
            wall_clock_seconds: 0.0,
            norm: None,
            files: Vec::new(),
        }
    }
}

/// Write the manifest; call after every data file is in place.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf, OutputError> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| OutputError::Io(e.to_string()))?;
    let path = dir.join(MANIFEST_NAME);
    write_atomic(&path, format!("{text}\n").as_bytes())?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, OutputError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| OutputError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| OutputError::Io(format!("{}: {e}", path.display())))
}

/// Check every listed digest against the file on disk.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest, OutputError> {
    let manifest = read_manifest(dir)?;
    for f in &manifest.files {
        let path = dir.join(&f.name);
        let bytes = fs::read(&path).map_err(|e| OutputError::Io(format!("{}: {e}", path.display())))?;
        let digest = sha256_hex(&bytes);
        if digest != f.sha256 {
            return Err(OutputError::DigestMismatch { file: f.name.clone(), expected: f.sha256.clone(), found: digest });
        }
    }
    Ok(manifest)
}
