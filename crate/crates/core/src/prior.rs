//! Exact draws from the joint prior and data simulation given a state.
//!
//! The precision prior is the product of the diagonal exponentials, the
//! spike-and-slab mixture, the slab variances and the block model, restricted
//! to positive definite Ω. Rejection on the whole network block therefore
//! samples it exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::backward_substitute_transpose;
use crate::model::{
    Adjacency, CoefficientPrior, HorseshoeState, ModelState, NetworkPrior, PrecisionState, SbmState, SpikeSlabState,
    VarCoefficients, VarConfig, VolatilityState,
};
use crate::partition::{sample_partition, Partition};
use crate::rng::{beta, gamma_rate, inv_gamma, std_normal, truncated_normal};

/// Rejection attempts before giving up on a positive definite Ω.
pub const MAX_REJECTIONS: usize = 100_000;

fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

struct Network {
    partition: Partition,
    edge_probs: DMatrix<f64>,
    adjacency: Adjacency,
    slab_vars: DMatrix<f64>,
    precision: PrecisionState,
}

fn draw_network<R: Rng + ?Sized>(m: usize, config: &VarConfig, rng: &mut R) -> Result<Network> {
    if config.diag_rate <= 0.0 {
        return Err(Error::InvalidParameter("a proper prior needs diag_rate > 0".into()));
    }
    for _ in 0..MAX_REJECTIONS {
        let (partition, edge_probs) = match config.network {
            NetworkPrior::Sbm => {
                let z = sample_partition(&config.partition_prior, m, rng)?;
                let h = z.n_clusters();
                let mut pi = DMatrix::zeros(h, h);
                for r in 0..h {
                    for s in r..h {
                        let p = beta(rng, config.edge_a, config.edge_b);
                        pi[(r, s)] = p;
                        pi[(s, r)] = p;
                    }
                }
                (z, pi)
            }
            NetworkPrior::Ssvs { inclusion } => (Partition::single_cluster(m), DMatrix::from_element(1, 1, inclusion)),
            NetworkPrior::Dense => (Partition::single_cluster(m), DMatrix::from_element(1, 1, 1.0)),
        };
        let adjacency = match config.network {
            NetworkPrior::Dense => Adjacency::complete(m),
            _ => Adjacency::from_pairs(m, |i, j| {
                rng.random::<f64>() < edge_probs[(partition.label(i), partition.label(j))]
            }),
        };
        let mut slab_vars = DMatrix::from_element(m, m, 1.0);
        let mut omega = DMatrix::zeros(m, m);
        for i in 0..m {
            omega[(i, i)] = exponential(config.diag_rate, rng);
            for j in (i + 1)..m {
                let tau2 = inv_gamma(rng, config.slab_shape, config.slab_rate);
                slab_vars[(i, j)] = tau2;
                slab_vars[(j, i)] = tau2;
                let var = if adjacency.get(i, j) { tau2 } else { config.spike_factor * tau2 };
                let w = var.sqrt() * std_normal(rng);
                omega[(i, j)] = w;
                omega[(j, i)] = w;
            }
        }
        if let Ok(precision) = PrecisionState::new(omega) {
            return Ok(Network { partition, edge_probs, adjacency, slab_vars, precision });
        }
    }
    Err(Error::NotPositiveDefinite { pivot: 0 })
}

/// One exact draw of every parameter from the prior. Requires a Normal
/// coefficient prior and a proper diagonal prior.
pub fn sample_prior_state<R: Rng + ?Sized>(
    m: usize,
    t_eff: usize,
    config: &VarConfig,
    rng: &mut R,
) -> Result<ModelState> {
    config.validate()?;
    let CoefficientPrior::Normal { variance } = config.coefficient_prior else {
        return Err(Error::InvalidParameter("prior simulation needs a Normal coefficient prior".into()));
    };
    let kx = m * config.lags + usize::from(config.include_intercept);
    let b = DMatrix::from_fn(kx, m, |_, _| variance.sqrt() * std_normal(rng));
    let coeffs = VarCoefficients::from_matrix(b, m, config.lags, config.include_intercept)?;

    let vp = &config.volatility_prior;
    let mut vol = VolatilityState::constant(t_eff, m, 0.0, 1.0);
    if config.stochastic_volatility {
        for j in 0..m {
            let rho = truncated_normal(rng, vp.rho_mean, vp.rho_var.sqrt(), -vp.rho_bound, vp.rho_bound);
            let sigma2 = 1.0 / gamma_rate(rng, vp.precision_shape, vp.precision_rate);
            let mut d = (sigma2 / (1.0 - rho * rho)).sqrt() * std_normal(rng);
            for t in 0..t_eff {
                if t > 0 {
                    d = rho * d + sigma2.sqrt() * std_normal(rng);
                }
                vol.log_vols[(t, j)] = d;
            }
            vol.rho[j] = rho;
            vol.sigma2[j] = sigma2;
        }
    } else {
        vol = VolatilityState::constant(t_eff, m, vp.rho_mean.clamp(-vp.rho_bound, vp.rho_bound), 1.0);
    }

    let net = draw_network(m, config, rng)?;
    Ok(ModelState {
        coeffs,
        horseshoe: HorseshoeState::ones(kx * m),
        vol,
        precision: net.precision,
        spike_slab: SpikeSlabState { adjacency: net.adjacency, slab_vars: net.slab_vars },
        sbm: SbmState { partition: net.partition, edge_probs: net.edge_probs },
    })
}

/// Simulates the sample given the state: the first `lags` rows are the
/// supplied pre-sample, the rest follow the VAR with shocks
/// N(0, DₜΩ⁻¹Dₜ) and Dₜ = diag(exp(dₜ/2)).
pub fn simulate_data<R: Rng + ?Sized>(state: &ModelState, presample: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let m = state.coeffs.n_series();
    let p = state.coeffs.lags();
    if presample.shape() != (p, m) {
        return Err(Error::Dimension(format!("pre-sample must be {p}×{m}")));
    }
    let t_eff = state.vol.log_vols.nrows();
    let mut values = DMatrix::zeros(p + t_eff, m);
    values.rows_mut(0, p).copy_from(presample);
    let l = state.precision.chol();
    for t in 0..t_eff {
        let recent: Vec<DVector<f64>> = (1..=p).map(|k| values.row(p + t - k).transpose()).collect();
        let z = DVector::from_fn(m, |_, _| std_normal(rng));
        let e = backward_substitute_transpose(l, &z);
        let shock = DVector::from_fn(m, |j, _| (0.5 * state.vol.log_vols[(t, j)]).exp() * e[j]);
        let y = state.coeffs.predict(&recent) + shock;
        values.set_row(p + t, &y.transpose());
    }
    Ok(values)
}
