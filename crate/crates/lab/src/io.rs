//! File formats: CSV tables, raw little-endian dumps and their JSON sidecars.
//! The layouts are documented in `docs/formats`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rbnlab_core::paths::SamplePath;
use rbnlab_core::spde::SpdeTrajectory;
use rbnlab_core::spectral::SpectralField;

use crate::config::Sigma;
use crate::error::{HarnessError, InModule, Result};

pub const SPECTRAL_CONVENTION: &str = "exp/sqrt(2pi)";

/// Shortest representation that reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Reads a numeric CSV, returning the header and the rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| HarnessError::invalid(path.display().to_string(), format!("`{f}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| HarnessError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `data.bin` → `data.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn f64s_to_le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn le_to_f64s(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(HarnessError::invalid(
            path.display().to_string(),
            format!("{} bytes is not a whole number of doubles", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

// ---------------------------------------------------------------------------
// Paths

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSidecar {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "H")]
    pub hurst: Option<f64>,
    pub seed: Option<u64>,
}

impl PathSidecar {
    pub fn of(path: &SamplePath) -> Self {
        Self {
            n: path.n_steps(),
            horizon: path.horizon(),
            hurst: path.hurst(),
            seed: path.seed(),
        }
    }
}

pub fn write_path_csv(file: &Path, path: &SamplePath) -> Result<()> {
    write_csv(
        file,
        &["t", "w"],
        path.values()
            .iter()
            .enumerate()
            .map(|(j, w)| [fmt_f64(path.time(j)), fmt_f64(*w)]),
    )
}

pub fn read_path_csv(file: &Path) -> Result<SamplePath> {
    let (header, rows) = read_csv(file)?;
    if header != ["t", "w"] {
        return Err(HarnessError::invalid(file.display().to_string(), "expected header `t,w`"));
    }
    let horizon = rows.last().map_or(0.0, |r| r[0]);
    SamplePath::from_values(horizon, rows.into_iter().map(|r| r[1]).collect()).in_module("paths")
}

/// Writes `w_0..w_n` as raw doubles plus a JSON sidecar next to it.
pub fn write_path_raw(file: &Path, path: &SamplePath) -> Result<()> {
    fs::write(file, f64s_to_le(path.values())).map_err(|e| HarnessError::io(file, e))?;
    write_json(&sidecar_path(file), &PathSidecar::of(path))
}

pub fn read_path_raw(file: &Path) -> Result<(SamplePath, PathSidecar)> {
    let meta: PathSidecar = read_json(&sidecar_path(file))?;
    let bytes = fs::read(file).map_err(|e| HarnessError::io(file, e))?;
    let values = le_to_f64s(&bytes, file)?;
    if values.len() != meta.n + 1 {
        return Err(HarnessError::invalid(
            file.display().to_string(),
            format!("sidecar says n = {}, file holds {} values", meta.n, values.len()),
        ));
    }
    Ok((SamplePath::from_values(meta.horizon, values).in_module("paths")?, meta))
}

// ---------------------------------------------------------------------------
// Spectral fields

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSidecar {
    #[serde(rename = "K")]
    pub k_max: usize,
    pub convention: String,
}

pub fn write_spectral_raw(file: &Path, field: &SpectralField) -> Result<()> {
    fs::write(file, field.to_le_bytes()).map_err(|e| HarnessError::io(file, e))?;
    write_json(
        &sidecar_path(file),
        &SpectralSidecar {
            k_max: field.k_max(),
            convention: SPECTRAL_CONVENTION.into(),
        },
    )
}

pub fn read_spectral_raw(file: &Path) -> Result<SpectralField> {
    let meta: SpectralSidecar = read_json(&sidecar_path(file))?;
    check_convention(&meta.convention, file)?;
    let bytes = fs::read(file).map_err(|e| HarnessError::io(file, e))?;
    SpectralField::from_le_bytes(&bytes, meta.k_max).in_module("spectral")
}

fn check_convention(convention: &str, file: &Path) -> Result<()> {
    if convention == SPECTRAL_CONVENTION {
        Ok(())
    } else {
        Err(HarnessError::invalid(
            file.display().to_string(),
            format!("unknown basis convention `{convention}`"),
        ))
    }
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub epsilon: Option<f64>,
    #[serde(rename = "K")]
    pub k_max: usize,
    #[serde(rename = "K_noise")]
    pub k_noise: usize,
    pub dt: f64,
    pub n_t: usize,
    pub path_seed: Option<u64>,
    pub hurst: Option<f64>,
    pub noise_seed: u64,
    pub noise_stream: u64,
    pub sigma: Sigma,
    /// Singularity exponent and integrability of `Σ²`.
    pub gamma: f64,
    pub p: f64,
    pub convention: String,
    /// Bytes per step record.
    pub record_bytes: usize,
    /// Step records, relative to the manifest.
    pub states: String,
    /// The path `w` as a `t,w` CSV, relative to the manifest.
    pub path: String,
}

/// Writes `<stem>.bin` (one spectral record per step), `<stem>_path.csv` and
/// the manifest `<stem>.json`; returns the three file names.
pub fn write_trajectory(
    dir: &Path,
    stem: &str,
    traj: &SpdeTrajectory,
    sigma: &Sigma,
    gamma: f64,
    p: f64,
) -> Result<[String; 3]> {
    let states = format!("{stem}.bin");
    let path_csv = format!("{stem}_path.csv");
    let manifest = format!("{stem}.json");
    let record_bytes = (2 * traj.k_max + 1) * 16;
    let mut bytes = Vec::with_capacity(record_bytes * traj.states.len());
    for s in &traj.states {
        bytes.extend(s.to_le_bytes());
    }
    let file = dir.join(&states);
    fs::write(&file, bytes).map_err(|e| HarnessError::io(&file, e))?;
    write_path_csv(&dir.join(&path_csv), &traj.path)?;
    write_json(
        &dir.join(&manifest),
        &TrajectoryManifest {
            epsilon: traj.epsilon,
            k_max: traj.k_max,
            k_noise: traj.k_noise,
            dt: traj.dt,
            n_t: traj.n_steps(),
            path_seed: traj.path.seed(),
            hurst: traj.path.hurst(),
            noise_seed: traj.noise_seed,
            noise_stream: traj.noise_stream,
            sigma: sigma.clone(),
            gamma,
            p,
            convention: SPECTRAL_CONVENTION.into(),
            record_bytes,
            states: states.clone(),
            path: path_csv.clone(),
        },
    )?;
    Ok([manifest, states, path_csv])
}

/// Reads a manifest and its step records.
pub fn read_trajectory(manifest: &Path) -> Result<(TrajectoryManifest, Vec<SpectralField>)> {
    let meta: TrajectoryManifest = read_json(manifest)?;
    check_convention(&meta.convention, manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let file = dir.join(&meta.states);
    let bytes = fs::read(&file).map_err(|e| HarnessError::io(&file, e))?;
    if bytes.len() != meta.record_bytes * (meta.n_t + 1) {
        return Err(HarnessError::invalid(
            file.display().to_string(),
            format!("expected {} records of {} bytes", meta.n_t + 1, meta.record_bytes),
        ));
    }
    let states = bytes
        .chunks_exact(meta.record_bytes)
        .map(|c| SpectralField::from_le_bytes(c, meta.k_max).in_module("spectral"))
        .collect::<Result<_>>()?;
    Ok((meta, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_repr_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e21] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn raw_rejects_partial_doubles() {
        assert!(le_to_f64s(&[0u8; 12], Path::new("x")).is_err());
    }
}
