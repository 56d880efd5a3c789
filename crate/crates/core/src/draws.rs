//! Retained posterior draws.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Adjacency, ModelState, PrecisionState, VarCoefficients};
use crate::partition::Partition;

/// Snapshot of one retained sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    /// Sweep index (0-based, counting burn-in).
    pub sweep: usize,
    pub coeffs: VarCoefficients,
    /// d at the last in-sample period.
    pub last_log_vols: DVector<f64>,
    pub rho: DVector<f64>,
    pub sigma2: DVector<f64>,
    /// Full (T−P)×M paths, kept only on request.
    pub log_vols: Option<DMatrix<f64>>,
    pub omega: DMatrix<f64>,
    pub adjacency: Adjacency,
    pub partition: Partition,
    pub edge_probs: DMatrix<f64>,
}

impl Draw {
    pub fn from_state(sweep: usize, state: &ModelState, full_paths: bool) -> Self {
        Self {
            sweep,
            coeffs: state.coeffs.clone(),
            last_log_vols: state.vol.last_row(),
            rho: state.vol.rho.clone(),
            sigma2: state.vol.sigma2.clone(),
            log_vols: full_paths.then(|| state.vol.log_vols.clone()),
            omega: state.precision.omega().clone(),
            adjacency: state.spike_slab.adjacency.clone(),
            partition: state.sbm.partition.clone(),
            edge_probs: state.sbm.edge_probs.clone(),
        }
    }

    pub fn precision(&self) -> Result<PrecisionState> {
        PrecisionState::new(self.omega.clone())
    }
}

/// Append-only collection of draws from one chain (or merged chains of the
/// same model).
#[derive(Debug, Clone, PartialEq)]
pub struct DrawStore {
    n_series: usize,
    lags: usize,
    intercept: bool,
    seed: u64,
    draws: Vec<Draw>,
}

impl DrawStore {
    pub fn new(n_series: usize, lags: usize, intercept: bool, seed: u64) -> Self {
        Self { n_series, lags, intercept, seed, draws: Vec::new() }
    }

    pub fn push(&mut self, draw: Draw) -> Result<()> {
        let c = &draw.coeffs;
        if c.n_series() != self.n_series || c.lags() != self.lags || c.has_intercept() != self.intercept {
            return Err(Error::Dimension("draw does not match the store's model dimensions".into()));
        }
        if draw.omega.nrows() != self.n_series || draw.partition.len() != self.n_series {
            return Err(Error::Dimension("draw network size does not match the store".into()));
        }
        self.draws.push(draw);
        Ok(())
    }

    /// Appends every draw of `other`, which must describe the same model.
    pub fn extend(&mut self, other: DrawStore) -> Result<()> {
        for d in other.draws {
            self.push(d)?;
        }
        Ok(())
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn n_series(&self) -> usize {
        self.n_series
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Trace of a scalar extracted from each draw.
    pub fn trace(&self, f: impl Fn(&Draw) -> f64) -> Vec<f64> {
        self.draws.iter().map(f).collect()
    }

    /// Posterior frequency of each edge.
    pub fn edge_frequencies(&self) -> DMatrix<f64> {
        let m = self.n_series;
        let mut f = DMatrix::zeros(m, m);
        for d in &self.draws {
            for i in 0..m {
                for j in 0..m {
                    if d.adjacency.get(i, j) {
                        f[(i, j)] += 1.0;
                    }
                }
            }
        }
        if !self.draws.is_empty() {
            f /= self.draws.len() as f64;
        }
        f
    }
}
