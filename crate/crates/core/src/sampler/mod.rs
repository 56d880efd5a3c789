//! The Gibbs sweep and chain driver.

pub mod coefficients;
pub mod horseshoe;
pub mod precision;
pub mod volatility;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::draws::{Draw, DrawStore};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::model::{
    Adjacency, CoefficientPrior, HorseshoeState, ModelState, NetworkPrior, PrecisionState, SbmState,
    SpikeSlabState, TimeSeriesPanel, VarCoefficients, VarConfig, VarData, VolatilityState,
};
use crate::partition::Partition;
use crate::rng::{seeded, ChainRng};
use crate::sbm::{edge_prob_matrix, sample_adjacency, sample_sbm, sample_slab_variances};

pub use coefficients::{coeff_posterior_moments, equation_transform, sample_coefficients};
pub use horseshoe::horseshoe_update;
pub use precision::{column_prior_variances, precision_column_params, sample_precision, ColumnConditional};
pub use volatility::{logvol_conditional_logdensity, sample_ar_params, sample_logvols, Acceptance};

/// Ridge added to the residual covariance before inverting it for the start.
pub const INITIAL_RIDGE: f64 = 1e-3;

/// Deterministic starting state.
pub fn initial_state(data: &VarData, config: &VarConfig) -> Result<ModelState> {
    let (t, m) = data.y.shape();
    let kx = data.n_regressors();
    let coeffs = VarCoefficients::zeros(m, data.lags, data.intercept);
    let mean = data.y.row_mean();
    let centered = DMatrix::from_fn(t, m, |r, c| data.y[(r, c)] - mean[c]);
    let mut cov = centered.tr_mul(&centered) / (t.saturating_sub(1).max(1) as f64);
    for i in 0..m {
        cov[(i, i)] += INITIAL_RIDGE;
    }
    let precision = PrecisionState::new(spd_inverse(&cov)?)?;
    let (adjacency, edge_probs) = match config.network {
        NetworkPrior::Sbm => (Adjacency::complete(m), DMatrix::from_element(1, 1, 0.5)),
        NetworkPrior::Ssvs { inclusion } => (Adjacency::complete(m), DMatrix::from_element(1, 1, inclusion)),
        NetworkPrior::Dense => (Adjacency::complete(m), DMatrix::from_element(1, 1, 1.0)),
    };
    let state = ModelState {
        coeffs,
        horseshoe: HorseshoeState::ones(kx * m),
        vol: VolatilityState::constant(t, m, 0.7, 0.2),
        precision,
        spike_slab: SpikeSlabState { adjacency, slab_vars: DMatrix::from_element(m, m, 1.0) },
        sbm: SbmState { partition: Partition::single_cluster(m), edge_probs },
    };
    Ok(state)
}

/// Prior variances of the coefficients in [`VarCoefficients::to_vec`] order.
pub fn coefficient_prior_variances(state: &ModelState, config: &VarConfig) -> Vec<f64> {
    let k = state.coeffs.len();
    match config.coefficient_prior {
        CoefficientPrior::Horseshoe => (0..k).map(|j| state.horseshoe.prior_variance(j)).collect(),
        CoefficientPrior::Normal { variance } => vec![variance; k],
    }
}

/// Acceptance counts from one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub log_vols: Acceptance,
    pub ar_params: Acceptance,
}

/// Runs every block once, in the order: coefficients, horseshoe scales,
/// log-volatilities and their AR parameters, Ω, edges, slab variances, then
/// block assignments followed by block edge probabilities.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &VarData,
    config: &VarConfig,
    rng: &mut R,
) -> Result<SweepStats> {
    let mut stats = SweepStats::default();
    let c = config.spike_factor;

    let prior_var = coefficient_prior_variances(state, config);
    sample_coefficients(&mut state.coeffs, data, state.precision.omega(), &state.vol.log_vols, &prior_var, rng)?;
    if config.coefficient_prior == CoefficientPrior::Horseshoe {
        horseshoe_update(&state.coeffs.to_vec(), &mut state.horseshoe, rng);
    }

    let residuals = data.residuals(&state.coeffs)?;
    if config.stochastic_volatility {
        stats.log_vols = sample_logvols(&mut state.vol, &residuals, state.precision.omega(), rng);
        stats.ar_params = sample_ar_params(&mut state.vol, &config.volatility_prior, rng);
    }

    let (_, s) = crate::model::rescale_residuals(&residuals, &state.vol.log_vols)?;
    state.precision = sample_precision(
        &s,
        &state.precision,
        &state.spike_slab.adjacency,
        &state.spike_slab.slab_vars,
        c,
        data.n_obs(),
        config.diag_rate,
        rng,
    )?;

    let omega = state.precision.omega();
    match config.network {
        NetworkPrior::Sbm => {
            let probs = edge_prob_matrix(&state.sbm.partition, &state.sbm.edge_probs)?;
            state.spike_slab.adjacency = sample_adjacency(omega, &state.spike_slab.slab_vars, c, &probs, rng);
        }
        NetworkPrior::Ssvs { inclusion } => {
            let m = omega.nrows();
            let probs = DMatrix::from_element(m, m, inclusion);
            state.spike_slab.adjacency = sample_adjacency(omega, &state.spike_slab.slab_vars, c, &probs, rng);
        }
        NetworkPrior::Dense => {}
    }
    sample_slab_variances(
        omega,
        &state.spike_slab.adjacency,
        &mut state.spike_slab.slab_vars,
        config.slab_shape,
        config.slab_rate,
        c,
        rng,
    );
    if config.network == NetworkPrior::Sbm {
        let (z, pi) = sample_sbm(
            &state.spike_slab.adjacency,
            &state.sbm.partition,
            &config.partition_prior,
            config.edge_a,
            config.edge_b,
            config.random_sweep_order,
            rng,
        )?;
        state.sbm = SbmState { partition: z, edge_probs: pi };
    }
    Ok(stats)
}

/// Chain-level diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDiagnostics {
    /// Acceptance rate of the single-move log-volatility updates.
    pub log_vol_acceptance: f64,
    /// Acceptance rate of the AR-parameter MH corrections.
    pub ar_acceptance: f64,
    /// Number of occupied blocks after every sweep.
    pub cluster_trace: Vec<usize>,
    /// Number of edges after every sweep.
    pub edge_trace: Vec<usize>,
}

/// Draws and diagnostics from one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: DrawStore,
    pub diagnostics: ChainDiagnostics,
    pub final_state: ModelState,
}

/// Runs a chain on `panel` with `config.seed`.
pub fn run_chain(panel: &TimeSeriesPanel, config: &VarConfig) -> Result<ChainOutput> {
    let data = VarData::new(panel, config.lags, config.include_intercept)?;
    let mut rng = seeded(config.seed);
    run_chain_on(&data, config, &mut rng)
}

/// Runs a chain on prepared data with a caller-owned stream.
pub fn run_chain_on(data: &VarData, config: &VarConfig, rng: &mut ChainRng) -> Result<ChainOutput> {
    config.validate()?;
    let mut state = initial_state(data, config)?;
    let mut store = DrawStore::new(data.n_series(), data.lags, data.intercept, config.seed);
    let mut diag = ChainDiagnostics {
        cluster_trace: Vec::with_capacity(config.n_draws),
        edge_trace: Vec::with_capacity(config.n_draws),
        ..Default::default()
    };
    let (mut vol_acc, mut ar_acc) = (Acceptance::default(), Acceptance::default());
    let step = (config.n_draws / 10).max(1);
    for i in 0..config.n_draws {
        let stats = gibbs_sweep(&mut state, data, config, rng).map_err(|e| annotate(e, i))?;
        state.check(config.volatility_prior.rho_bound).map_err(|e| annotate(e, i))?;
        vol_acc.add(stats.log_vols);
        ar_acc.add(stats.ar_params);
        diag.cluster_trace.push(state.sbm.partition.n_clusters());
        diag.edge_trace.push(state.spike_slab.adjacency.n_edges());
        if config.is_retained(i) {
            store.push(Draw::from_state(i, &state, config.store_full_paths))?;
        }
        if (i + 1) % step == 0 {
            log::debug!(
                "sweep {}/{}: {} blocks, {} edges",
                i + 1,
                config.n_draws,
                state.sbm.partition.n_clusters(),
                state.spike_slab.adjacency.n_edges()
            );
        }
    }
    diag.log_vol_acceptance = vol_acc.rate();
    diag.ar_acceptance = ar_acc.rate();
    Ok(ChainOutput { draws: store, diagnostics: diag, final_state: state })
}

fn annotate(e: Error, sweep: usize) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} (sweep {sweep})")),
        other => other,
    }
}

/// Posterior mean of the full log-volatility paths over retained draws.
pub fn mean_log_vol_paths(store: &DrawStore) -> Option<DMatrix<f64>> {
    let mut it = store.draws().iter().filter_map(|d| d.log_vols.as_ref());
    let first = it.next()?.clone();
    let mut n = 1.0;
    let sum = it.fold(first, |acc, p| {
        n += 1.0;
        acc + p
    });
    Some(sum / n)
}

/// Posterior mean of a vector-valued summary.
pub fn posterior_mean(store: &DrawStore, f: impl Fn(&Draw) -> DVector<f64>) -> Option<DVector<f64>> {
    let mut it = store.draws().iter().map(f);
    let first = it.next()?;
    let mut n = 1.0;
    let sum = it.fold(first, |acc, v| {
        n += 1.0;
        acc + v
    });
    Some(sum / n)
}
