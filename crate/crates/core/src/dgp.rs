//! Simulated networks and VARs, hit-rate scoring and the replication grid.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::draws::DrawStore;
use crate::error::{Error, Result};
use crate::linalg::{backward_substitute_transpose, cholesky_lower};
use crate::model::{Adjacency, NetworkPrior, TimeSeriesPanel, VarCoefficients, VarConfig, VarData};
use crate::partition::{calibrate, GibbsPriorSpec, Partition, PriorVariant};
use crate::rng::{beta, derive_seed, seeded, std_normal};
use crate::sampler::run_chain_on;

/// Beta(a, b) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub const fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

/// Homophilous within-block edge probabilities.
pub const WITHIN_DEFAULT: BetaParams = BetaParams::new(100.0, 1.0);
/// Homophilous cross-block edge probabilities.
pub const CROSS_DEFAULT: BetaParams = BetaParams::new(1.0, 100.0);
/// Edge probability of the non-clustered design.
pub const UNCLUSTERED_EDGE_PROB: f64 = 0.2;

/// Balanced block sizes with the remainder given to the first blocks.
pub fn balanced_partition(m: usize, h: usize) -> Partition {
    let base = m / h;
    let extra = m % h;
    let mut labels = Vec::with_capacity(m);
    for g in 0..h {
        let size = base + usize::from(g < extra);
        labels.extend(std::iter::repeat_n(g, size));
    }
    Partition::canonical(&labels)
}

/// Block network: one within probability per block, one cross probability
/// per block pair, then independent edges.
pub fn sample_true_network<R: Rng + ?Sized>(
    m: usize,
    h: usize,
    within: BetaParams,
    cross: BetaParams,
    rng: &mut R,
) -> Result<(Partition, Adjacency)> {
    if h == 0 || h > m {
        return Err(Error::InvalidParameter(format!("{h} blocks for {m} nodes")));
    }
    let z = balanced_partition(m, h);
    let mut pi = DMatrix::zeros(h, h);
    for g in 0..h {
        pi[(g, g)] = beta(rng, within.a, within.b);
    }
    for g in 0..h {
        for k in (g + 1)..h {
            let p = beta(rng, cross.a, cross.b);
            pi[(g, k)] = p;
            pi[(k, g)] = p;
        }
    }
    let adj = Adjacency::from_pairs(m, |i, j| rng.random::<f64>() < pi[(z.label(i), z.label(j))]);
    Ok((z, adj))
}

/// Erdős–Rényi network with edge probability `p`.
pub fn sample_unclustered_network<R: Rng + ?Sized>(m: usize, p: f64, rng: &mut R) -> Adjacency {
    Adjacency::from_pairs(m, |_, _| rng.random::<f64>() < p)
}

/// Ω with off-diagonal support exactly on the edges, magnitudes uniform on
/// [0.1, 0.3] with random sign, and a diagonal making it strictly diagonally
/// dominant.
pub fn precision_from_adjacency<R: Rng + ?Sized>(adjacency: &Adjacency, rng: &mut R) -> DMatrix<f64> {
    let m = adjacency.len();
    let mut omega = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            if adjacency.get(i, j) {
                let mag = rng.random_range(0.1..=0.3);
                let v = if rng.random::<bool>() { mag } else { -mag };
                omega[(i, j)] = v;
                omega[(j, i)] = v;
            }
        }
    }
    for i in 0..m {
        omega[(i, i)] = 1.0 + omega.row(i).iter().map(|v: &f64| v.abs()).sum::<f64>();
    }
    omega
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Lag matrices with N(0, (0.1/√M)²) entries and no intercept, shrunk to
/// companion spectral radius 0.8 whenever it exceeds 0.9.
pub fn random_stable_coefficients<R: Rng + ?Sized>(m: usize, lags: usize, rng: &mut R) -> VarCoefficients {
    let sd = 0.1 / (m as f64).sqrt();
    let mats: Vec<DMatrix<f64>> = (0..lags).map(|_| DMatrix::from_fn(m, m, |_, _| sd * std_normal(rng))).collect();
    let mut coeffs = VarCoefficients::from_parts(&mats, None).expect("conformable lag matrices");
    let r = spectral_radius(&coeffs.companion());
    if r > 0.9 {
        let s = 0.8 / r;
        for p in 1..=lags {
            let a = coeffs.lag_matrix(p) * s.powi(p as i32);
            coeffs.set_lag_matrix(p, &a);
        }
    }
    coeffs
}

/// Simulated VAR with stochastic volatility and its log-volatility paths.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub panel: TimeSeriesPanel,
    /// T×M, row t holds d_{·,t}.
    pub log_vols: DMatrix<f64>,
}

/// Simulates T periods starting from y₀ = 0 and d₀ = 0:
/// d_{j,t} = ρ d_{j,t−1} + √σ² η, εₜ ~ N(0, DₜΩ⁻¹Dₜ), yₜ = c + Σ A_p yₜ₋ₚ + εₜ.
pub fn simulate_var<R: Rng + ?Sized>(
    coeffs: &VarCoefficients,
    omega: &DMatrix<f64>,
    t: usize,
    sv_rho: f64,
    sv_var: f64,
    rng: &mut R,
) -> Result<Simulated> {
    let m = coeffs.n_series();
    if omega.shape() != (m, m) {
        return Err(Error::Dimension("precision does not match the coefficients".into()));
    }
    let l = cholesky_lower(omega)?;
    let p = coeffs.lags();
    let mut history: Vec<DVector<f64>> = vec![DVector::zeros(m); p];
    let mut d: DVector<f64> = DVector::zeros(m);
    let sd = sv_var.sqrt();
    let mut values = DMatrix::zeros(t, m);
    let mut vols = DMatrix::zeros(t, m);
    for s in 0..t {
        for j in 0..m {
            d[j] = sv_rho * d[j] + sd * std_normal(rng);
        }
        let z = DVector::from_fn(m, |_, _| std_normal(rng));
        let e = backward_substitute_transpose(&l, &z);
        let shock = DVector::from_fn(m, |j, _| (0.5 * d[j]).exp() * e[j]);
        let y = coeffs.predict(&history) + shock;
        history.rotate_right(1);
        history[0] = y.clone();
        values.set_row(s, &y.transpose());
        vols.set_row(s, &d.transpose());
    }
    Ok(Simulated { panel: TimeSeriesPanel::from_matrix(values)?, log_vols: vols })
}

/// Percentage of unordered node pairs classified identically.
pub fn hit_rate(estimate: &Adjacency, truth: &Adjacency) -> Result<f64> {
    let m = truth.len();
    if estimate.len() != m {
        return Err(Error::Dimension(format!("{}-node estimate for a {m}-node network", estimate.len())));
    }
    if m < 2 {
        return Ok(100.0);
    }
    let mut hits = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            hits += usize::from(estimate.get(i, j) == truth.get(i, j));
        }
    }
    Ok(100.0 * hits as f64 / (m * (m - 1) / 2) as f64)
}

/// Edge present iff its posterior frequency exceeds one half.
pub fn posterior_median_adjacency(store: &DrawStore) -> Adjacency {
    let m = store.n_series();
    let n = store.len();
    let mut counts = vec![0usize; m * m];
    for d in store.draws() {
        for i in 0..m {
            for j in (i + 1)..m {
                counts[i * m + j] += usize::from(d.adjacency.get(i, j));
            }
        }
    }
    Adjacency::from_pairs(m, |i, j| 2 * counts[i * m + j] > n)
}

/// Number of true blocks used for a network of `m` nodes.
pub fn true_block_count(m: usize) -> usize {
    match m {
        0..=5 => 2.min(m.max(1)),
        6..=30 => 3,
        _ => 4,
    }
}

/// A Monte Carlo grid over sizes, lengths and designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationGrid {
    pub sizes: Vec<usize>,
    pub lengths: Vec<usize>,
    /// Designs to run: `true` for the block network, `false` for Erdős–Rényi.
    pub clustered: Vec<bool>,
    /// Partition priors to compare against the fixed-probability baseline.
    pub variants: Vec<String>,
    pub replications: usize,
    /// Prior E[H] is this multiple of the true block count.
    pub calibration_multiple: f64,
    /// Inclusion probability of the fixed-probability baseline.
    pub ssvs_inclusion: f64,
    /// Swap the within/cross Beta orientation to within Beta(1, 100) and
    /// cross Beta(100, 1), which makes the blocks heterophilous.
    pub literal_beta_orientation: bool,
    pub unclustered_edge_prob: f64,
    pub lags: usize,
    pub n_draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub sv_rho: f64,
    pub sv_var: f64,
}

impl Default for SimulationGrid {
    fn default() -> Self {
        Self {
            sizes: vec![5, 30, 50],
            lengths: vec![100, 300],
            clustered: vec![true, false],
            variants: ["GN", "DM", "DP", "PY"].iter().map(|s| s.to_string()).collect(),
            replications: 25,
            calibration_multiple: 1.5,
            ssvs_inclusion: 0.5,
            literal_beta_orientation: false,
            unclustered_edge_prob: UNCLUSTERED_EDGE_PROB,
            lags: 1,
            n_draws: 3000,
            burn_in: 1500,
            thin: 1,
            seed: 0,
            sv_rho: 0.9,
            sv_var: 0.2,
        }
    }
}

/// Mean hit rates of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub m: usize,
    pub t: usize,
    pub clustered: bool,
    /// Mean hit rate per model label ("GN", ..., "SSVS").
    pub mean_hit_rate: Vec<(String, f64)>,
    /// Replications that completed for every model.
    pub completed: usize,
    pub failed: usize,
    /// Hit rates per replication, in model order.
    pub replications: Vec<Vec<f64>>,
}

impl CellResult {
    pub fn mean_of(&self, label: &str) -> Option<f64> {
        self.mean_hit_rate.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }
}

/// Everything produced by [`run_simulation_grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResults {
    pub models: Vec<String>,
    pub cells: Vec<CellResult>,
}

/// Column header of the summary table.
pub const TABLE_COLUMNS: [&str; 5] = ["GN", "DM", "DP", "PY", "SSVS"];

impl GridResults {
    /// Table with partition-prior columns as differences to the baseline and
    /// the baseline in absolute terms. Columns for variants that were not run
    /// are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["M".to_string(), "T".to_string(), "design".to_string()];
        header.extend(TABLE_COLUMNS.iter().map(|s| s.to_string()));
        header.push("completed".into());
        header.push("failed".into());
        w.write_record(&header)?;
        for c in &self.cells {
            let base = c.mean_of("SSVS");
            let mut row =
                vec![c.m.to_string(), c.t.to_string(), if c.clustered { "clustered" } else { "unclustered" }.into()];
            for col in &TABLE_COLUMNS[..4] {
                row.push(match (c.mean_of(col), base) {
                    (Some(v), Some(b)) => format!("{:.2}", v - b),
                    _ => String::new(),
                });
            }
            row.push(base.map(|b| format!("{b:.2}")).unwrap_or_default());
            row.push(c.completed.to_string());
            row.push(c.failed.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per (cell, replication, model).
    pub fn write_replications_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["M", "T", "design", "replication", "model", "hit_rate"])?;
        for c in &self.cells {
            for (r, rates) in c.replications.iter().enumerate() {
                for (model, hr) in self.models.iter().zip(rates) {
                    w.write_record([
                        c.m.to_string(),
                        c.t.to_string(),
                        if c.clustered { "clustered" } else { "unclustered" }.to_string(),
                        r.to_string(),
                        model.clone(),
                        format!("{hr:.6}"),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One generated dataset with its true network.
#[derive(Debug, Clone)]
pub struct Replication {
    pub truth: Adjacency,
    pub blocks: Option<Partition>,
    pub omega: DMatrix<f64>,
    pub coeffs: VarCoefficients,
    pub data: Simulated,
}

/// Draws the network, Ω, coefficients and data of one replication.
pub fn generate_replication<R: Rng + ?Sized>(
    grid: &SimulationGrid,
    m: usize,
    t: usize,
    clustered: bool,
    rng: &mut R,
) -> Result<Replication> {
    let (within, cross) = if grid.literal_beta_orientation {
        (CROSS_DEFAULT, WITHIN_DEFAULT)
    } else {
        (WITHIN_DEFAULT, CROSS_DEFAULT)
    };
    let (blocks, truth) = if clustered {
        let (z, a) = sample_true_network(m, true_block_count(m), within, cross, rng)?;
        (Some(z), a)
    } else {
        (None, sample_unclustered_network(m, grid.unclustered_edge_prob, rng))
    };
    let omega = precision_from_adjacency(&truth, rng);
    let coeffs = random_stable_coefficients(m, grid.lags, rng);
    let data = simulate_var(&coeffs, &omega, t, grid.sv_rho, grid.sv_var, rng)?;
    Ok(Replication { truth, blocks, omega, coeffs, data })
}

/// Sampler settings of one grid model.
fn model_config(grid: &SimulationGrid, network: NetworkPrior, prior: GibbsPriorSpec) -> VarConfig {
    VarConfig {
        lags: grid.lags,
        n_draws: grid.n_draws,
        burn_in: grid.burn_in,
        thin: grid.thin,
        network,
        partition_prior: prior,
        ..VarConfig::default()
    }
}

/// Fits the model and scores the posterior median network.
pub fn score_model(rep: &Replication, config: &VarConfig, seed: u64) -> Result<f64> {
    let data = VarData::new(&rep.data.panel, config.lags, config.include_intercept)?;
    let config = VarConfig { seed, ..config.clone() };
    let out = run_chain_on(&data, &config, &mut seeded(seed))?;
    hit_rate(&posterior_median_adjacency(&out.draws), &rep.truth)
}

/// Runs every (cell, replication, model) task in parallel; every task has its
/// own seed derived from the grid seed, so results do not depend on the
/// number of threads.
pub fn run_simulation_grid(grid: &SimulationGrid) -> Result<GridResults> {
    let variants: Vec<PriorVariant> =
        grid.variants.iter().map(|v| PriorVariant::from_name(v)).collect::<Result<_>>()?;
    let mut models: Vec<String> = variants.iter().map(|v| v.name().to_string()).collect();
    models.push("SSVS".into());

    let mut specs: HashMap<(usize, usize), GibbsPriorSpec> = HashMap::new();
    for &m in &grid.sizes {
        let target = (grid.calibration_multiple * true_block_count(m) as f64).min(m as f64);
        for (k, v) in variants.iter().enumerate() {
            specs.insert((m, k), calibrate(*v, m, target)?.spec);
        }
    }

    let mut cells = Vec::new();
    for &m in &grid.sizes {
        for &t in &grid.lengths {
            for &c in &grid.clustered {
                cells.push((m, t, c));
            }
        }
    }
    let n_models = models.len();
    let tasks: Vec<(usize, usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.replications).flat_map(move |r| (0..n_models).map(move |k| (c, r, k))))
        .collect();

    let scores: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(c, r, k)| {
            let (m, t, clustered) = cells[c];
            let mut rng = seeded(derive_seed(grid.seed, &[c as u64, r as u64]));
            let rep = generate_replication(grid, m, t, clustered, &mut rng)?;
            let config = if k < variants.len() {
                model_config(grid, NetworkPrior::Sbm, specs[&(m, k)].clone())
            } else {
                model_config(grid, NetworkPrior::Ssvs { inclusion: grid.ssvs_inclusion }, GibbsPriorSpec::default())
            };
            score_model(&rep, &config, derive_seed(grid.seed, &[c as u64, r as u64, k as u64 + 1]))
        })
        .collect();

    let mut results = Vec::with_capacity(cells.len());
    for (ci, &(m, t, clustered)) in cells.iter().enumerate() {
        let mut reps = Vec::new();
        let mut failed = 0;
        for r in 0..grid.replications {
            let base = (ci * grid.replications + r) * n_models;
            let mut row = Vec::with_capacity(n_models);
            let mut ok = true;
            for k in 0..n_models {
                match &scores[base + k] {
                    Ok(v) => row.push(*v),
                    Err(e) => {
                        log::warn!("cell M={m} T={t} replication {r} model {}: {e}", models[k]);
                        ok = false;
                    }
                }
            }
            if ok {
                reps.push(row);
            } else {
                failed += 1;
            }
        }
        let mean_hit_rate = models
            .iter()
            .enumerate()
            .filter(|_| !reps.is_empty())
            .map(|(k, name)| (name.clone(), reps.iter().map(|r| r[k]).sum::<f64>() / reps.len() as f64))
            .collect();
        results.push(CellResult { m, t, clustered, mean_hit_rate, completed: reps.len(), failed, replications: reps });
    }
    Ok(GridResults { models, cells: results })
}
