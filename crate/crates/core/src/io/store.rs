//! Columnar on-disk layout for draw stores.
//!
//! A store directory holds one little-endian binary file per component, with
//! draws stacked along the leading axis, and a `manifest.json` describing
//! dimensions, seed, code version and configuration hash.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::draws::{Draw, DrawStore};
use crate::error::{Error, Result};
use crate::model::{Adjacency, VarCoefficients};
use crate::partition::Partition;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_draws: usize,
    pub n_series: usize,
    pub lags: usize,
    pub intercept: bool,
    /// Rows of the stored log-volatility paths, when kept.
    pub log_vol_rows: Option<usize>,
    pub files: Vec<String>,
}

fn write_f64s(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn write_u64s(path: &Path, values: impl Iterator<Item = u64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_words(path: &Path, expected: usize) -> Result<Vec<[u8; 8]>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 8 {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * 8
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| c.try_into().expect("8-byte chunk")).collect())
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    Ok(read_words(path, expected)?.into_iter().map(f64::from_le_bytes).collect())
}

fn read_u64s(path: &Path, expected: usize) -> Result<Vec<u64>> {
    Ok(read_words(path, expected)?.into_iter().map(u64::from_le_bytes).collect())
}

/// Writes `store` under `dir`, creating it if needed.
pub fn save_store(store: &DrawStore, dir: &Path, config_hash: &str) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let draws = store.draws();
    let m = store.n_series();
    let log_vol_rows = draws.first().and_then(|d| d.log_vols.as_ref().map(|l| l.nrows()));
    if draws.iter().any(|d| d.log_vols.as_ref().map(|l| l.nrows()) != log_vol_rows) {
        return Err(Error::Dimension("log-volatility paths must be kept for all draws or none".into()));
    }
    let mut files = vec![
        "sweep.u64",
        "coeffs.f64",
        "last_log_vols.f64",
        "rho.f64",
        "sigma2.f64",
        "omega.f64",
        "adjacency.u8",
        "partition.u64",
        "edge_prob_dims.u64",
        "edge_probs.f64",
    ];
    write_u64s(&dir.join("sweep.u64"), draws.iter().map(|d| d.sweep as u64))?;
    write_f64s(&dir.join("coeffs.f64"), draws.iter().flat_map(|d| d.coeffs.matrix().iter().copied()))?;
    write_f64s(&dir.join("last_log_vols.f64"), draws.iter().flat_map(|d| d.last_log_vols.iter().copied()))?;
    write_f64s(&dir.join("rho.f64"), draws.iter().flat_map(|d| d.rho.iter().copied()))?;
    write_f64s(&dir.join("sigma2.f64"), draws.iter().flat_map(|d| d.sigma2.iter().copied()))?;
    write_f64s(&dir.join("omega.f64"), draws.iter().flat_map(|d| d.omega.iter().copied()))?;
    let adjacency: Vec<u8> = draws.iter().flat_map(|d| d.adjacency.as_bytes()).collect();
    fs::write(dir.join("adjacency.u8"), adjacency)?;
    write_u64s(&dir.join("partition.u64"), draws.iter().flat_map(|d| d.partition.labels().iter().map(|&l| l as u64)))?;
    write_u64s(&dir.join("edge_prob_dims.u64"), draws.iter().map(|d| d.edge_probs.nrows() as u64))?;
    write_f64s(&dir.join("edge_probs.f64"), draws.iter().flat_map(|d| d.edge_probs.iter().copied()))?;
    if log_vol_rows.is_some() {
        files.push("log_vols.f64");
        write_f64s(
            &dir.join("log_vols.f64"),
            draws.iter().flat_map(|d| d.log_vols.as_ref().expect("checked above").iter().copied()),
        )?;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash.to_string(),
        seed: store.seed(),
        n_draws: draws.len(),
        n_series: m,
        lags: store.lags(),
        intercept: store.has_intercept(),
        log_vol_rows,
        files: files.into_iter().map(String::from).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))
}

/// Loads a store. A configuration hash that differs from `expected_hash`
/// is logged as a warning, not an error.
pub fn load_store(dir: &Path, expected_hash: Option<&str>) -> Result<(DrawStore, Manifest)> {
    let man = read_manifest(dir)?;
    if man.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported store format {}", man.format_version)));
    }
    if let Some(h) = expected_hash {
        if h != man.config_hash {
            log::warn!("configuration hash {h} differs from the stored {}", man.config_hash);
        }
    }
    let (n, m) = (man.n_draws, man.n_series);
    let kx = m * man.lags + usize::from(man.intercept);
    let sweeps = read_u64s(&dir.join("sweep.u64"), n)?;
    let coeffs = read_f64s(&dir.join("coeffs.f64"), n * kx * m)?;
    let last = read_f64s(&dir.join("last_log_vols.f64"), n * m)?;
    let rho = read_f64s(&dir.join("rho.f64"), n * m)?;
    let sigma2 = read_f64s(&dir.join("sigma2.f64"), n * m)?;
    let omega = read_f64s(&dir.join("omega.f64"), n * m * m)?;
    let adjacency = fs::read(dir.join("adjacency.u8"))?;
    if adjacency.len() != n * m * m {
        return Err(Error::Format("adjacency file has the wrong length".into()));
    }
    let labels = read_u64s(&dir.join("partition.u64"), n * m)?;
    let dims = read_u64s(&dir.join("edge_prob_dims.u64"), n)?;
    let total: usize = dims.iter().map(|&h| (h * h) as usize).sum();
    let probs = read_f64s(&dir.join("edge_probs.f64"), total)?;
    let log_vols = match man.log_vol_rows {
        Some(rows) => Some(read_f64s(&dir.join("log_vols.f64"), n * rows * m)?),
        None => None,
    };

    let mut store = DrawStore::new(m, man.lags, man.intercept, man.seed);
    let mut offset = 0;
    for k in 0..n {
        let vec = |v: &[f64]| DVector::from_column_slice(&v[k * m..(k + 1) * m]);
        let b = DMatrix::from_column_slice(kx, m, &coeffs[k * kx * m..(k + 1) * kx * m]);
        let h = dims[k] as usize;
        let edge_probs = DMatrix::from_column_slice(h, h, &probs[offset..offset + h * h]);
        offset += h * h;
        let z: Vec<usize> = labels[k * m..(k + 1) * m].iter().map(|&l| l as usize).collect();
        store.push(Draw {
            sweep: sweeps[k] as usize,
            coeffs: VarCoefficients::from_matrix(b, m, man.lags, man.intercept)?,
            last_log_vols: vec(&last),
            rho: vec(&rho),
            sigma2: vec(&sigma2),
            log_vols: match (&log_vols, man.log_vol_rows) {
                (Some(l), Some(rows)) => {
                    Some(DMatrix::from_column_slice(rows, m, &l[k * rows * m..(k + 1) * rows * m]))
                }
                _ => None,
            },
            omega: DMatrix::from_column_slice(m, m, &omega[k * m * m..(k + 1) * m * m]),
            adjacency: Adjacency::from_bytes(m, &adjacency[k * m * m..(k + 1) * m * m])?,
            partition: Partition::new(z)?,
            edge_probs,
        })?;
    }
    Ok((store, man))
}
