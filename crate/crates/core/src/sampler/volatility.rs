//! Single-move Metropolis-Hastings for the log-volatilities and the AR(1)
//! parameters of their state equations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::model::{VolatilityPrior, VolatilityState};
use crate::rng::{gamma_rate, std_normal, truncated_normal};

/// Random-walk step used when the local expansion has no curvature.
pub const FALLBACK_STEP: f64 = 0.2;

/// Measurement part of the conditional of d_{j,t}:
/// g(d) = −d/2 − ½·a·e^{−d} − b·e^{−d/2}, with a = Ω_jj ε²_{j,t} and
/// b = ε_{j,t}·Σ_{k≠j} Ω_jk ε̃_{k,t}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub a: f64,
    pub b: f64,
}

impl Measurement {
    pub fn value(&self, d: f64) -> f64 {
        let e = (-0.5 * d).exp();
        -0.5 * d - 0.5 * self.a * e * e - self.b * e
    }

    pub fn first(&self, d: f64) -> f64 {
        let e = (-0.5 * d).exp();
        -0.5 + 0.5 * self.a * e * e + 0.5 * self.b * e
    }

    pub fn second(&self, d: f64) -> f64 {
        let e = (-0.5 * d).exp();
        -0.5 * self.a * e * e - 0.25 * self.b * e
    }
}

/// Gaussian AR(1) prior of d_{j,t} given its neighbours, as precision and mean.
fn neighbour_prior(path: &[f64], t: usize, rho: f64, sigma2: f64) -> (f64, f64) {
    let n = path.len();
    match (t == 0, t + 1 == n) {
        (true, true) => ((1.0 - rho * rho) / sigma2, 0.0),
        (true, false) => (1.0 / sigma2, rho * path[1]),
        (false, true) => (1.0 / sigma2, rho * path[t - 1]),
        (false, false) => {
            let q = 1.0 + rho * rho;
            (q / sigma2, rho * (path[t - 1] + path[t + 1]) / q)
        }
    }
}

/// AR(1) log-prior terms that involve d_{j,t} = `d`, with the stationary
/// distribution at t = 0.
fn ar_terms(path: &[f64], t: usize, d: f64, rho: f64, sigma2: f64) -> f64 {
    let mut v = if t == 0 {
        -0.5 * d * d * (1.0 - rho * rho) / sigma2
    } else {
        let r = d - rho * path[t - 1];
        -0.5 * r * r / sigma2
    };
    if t + 1 < path.len() {
        let r = path[t + 1] - rho * d;
        v -= 0.5 * r * r / sigma2;
    }
    v
}

fn ar_derivative(path: &[f64], t: usize, d: f64, rho: f64, sigma2: f64) -> f64 {
    let mut v = if t == 0 { -d * (1.0 - rho * rho) / sigma2 } else { -(d - rho * path[t - 1]) / sigma2 };
    if t + 1 < path.len() {
        v += rho * (path[t + 1] - rho * d) / sigma2;
    }
    v
}

fn measurement_at(
    j: usize,
    t: usize,
    vol: &VolatilityState,
    omega: &DMatrix<f64>,
    residuals: &DMatrix<f64>,
) -> Measurement {
    let m = omega.nrows();
    let e = residuals[(t, j)];
    let mut cross = 0.0;
    for k in 0..m {
        if k != j {
            cross += omega[(j, k)] * (-0.5 * vol.log_vols[(t, k)]).exp() * residuals[(t, k)];
        }
    }
    Measurement { a: omega[(j, j)] * e * e, b: e * cross }
}

/// Log conditional density of d_{j,t} = `d` (up to a constant) given
/// everything else; `residuals` are the unscaled VAR residuals.
pub fn logvol_conditional_logdensity(
    j: usize,
    t: usize,
    d: f64,
    vol: &VolatilityState,
    omega: &DMatrix<f64>,
    residuals: &DMatrix<f64>,
) -> f64 {
    let path: Vec<f64> = vol.log_vols.column(j).iter().copied().collect();
    measurement_at(j, t, vol, omega, residuals).value(d) + ar_terms(&path, t, d, vol.rho[j], vol.sigma2[j])
}

/// Derivative in `d` of [`logvol_conditional_logdensity`].
pub fn logvol_conditional_derivative(
    j: usize,
    t: usize,
    d: f64,
    vol: &VolatilityState,
    omega: &DMatrix<f64>,
    residuals: &DMatrix<f64>,
) -> f64 {
    let path: Vec<f64> = vol.log_vols.column(j).iter().copied().collect();
    measurement_at(j, t, vol, omega, residuals).first(d) + ar_derivative(&path, t, d, vol.rho[j], vol.sigma2[j])
}

/// Acceptance bookkeeping for one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Acceptance {
    pub accepted: usize,
    pub proposed: usize,
}

impl Acceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn add(&mut self, other: Acceptance) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// One MH move for a single d given its measurement terms and prior.
fn single_move<R: Rng + ?Sized>(current: f64, g: Measurement, prec: f64, mu: f64, rng: &mut R) -> (f64, bool) {
    let target = |d: f64| g.value(d) - 0.5 * prec * (d - mu) * (d - mu);
    let curvature = prec - g.second(mu);
    let z = std_normal(rng);
    let u: f64 = rng.random();
    let (proposal, log_ratio) = if curvature > 0.0 && curvature.is_finite() {
        let mean = mu + g.first(mu) / curvature;
        let sd = curvature.sqrt().recip();
        let proposal = mean + sd * z;
        let log_q = |d: f64| -0.5 * curvature * (d - mean) * (d - mean);
        (proposal, target(proposal) - target(current) + log_q(current) - log_q(proposal))
    } else {
        let proposal = current + FALLBACK_STEP * z;
        (proposal, target(proposal) - target(current))
    };
    if proposal.is_finite() && u.ln() < log_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// One sweep over every (j, t), series by series. `residuals` are the
/// unscaled VAR residuals on the effective sample.
pub fn sample_logvols<R: Rng + ?Sized>(
    vol: &mut VolatilityState,
    residuals: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    rng: &mut R,
) -> Acceptance {
    let (t_eff, m) = residuals.shape();
    let mut scaled = residuals.zip_map(&vol.log_vols, |e, d| e * (-0.5 * d).exp());
    let mut acc = Acceptance::default();
    let mut path = vec![0.0; t_eff];
    for j in 0..m {
        let (rho, sigma2) = (vol.rho[j], vol.sigma2[j]);
        let omega_jj = omega[(j, j)];
        for (t, p) in path.iter_mut().enumerate() {
            *p = vol.log_vols[(t, j)];
        }
        for t in 0..t_eff {
            let mut cross = 0.0;
            for k in 0..m {
                if k != j {
                    cross += omega[(j, k)] * scaled[(t, k)];
                }
            }
            let e = residuals[(t, j)];
            let g = Measurement { a: omega_jj * e * e, b: e * cross };
            let (prec, mu) = neighbour_prior(&path, t, rho, sigma2);
            let (d, accepted) = single_move(path[t], g, prec, mu, rng);
            path[t] = d;
            acc.proposed += 1;
            acc.accepted += usize::from(accepted);
        }
        for t in 0..t_eff {
            vol.log_vols[(t, j)] = path[t];
            scaled[(t, j)] = residuals[(t, j)] * (-0.5 * path[t]).exp();
        }
    }
    acc
}

/// Log of the factor the stationary start contributes as a function of ρ and σ².
fn initial_term(d0: f64, rho: f64, sigma2: f64) -> f64 {
    let q = 1.0 - rho * rho;
    0.5 * q.ln() - 0.5 * sigma2.ln() - 0.5 * d0 * d0 * q / sigma2
}

/// Parameters of the ρ proposal: the Gaussian regression of dₜ on dₜ₋₁
/// combined with the prior, before truncation.
pub fn rho_proposal(path: &[f64], sigma2: f64, prior: &VolatilityPrior) -> (f64, f64) {
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for t in 1..path.len() {
        sxx += path[t - 1] * path[t - 1];
        sxy += path[t - 1] * path[t];
    }
    let prec = sxx / sigma2 + 1.0 / prior.rho_var;
    let mean = (sxy / sigma2 + prior.rho_mean / prior.rho_var) / prec;
    (mean, prec.sqrt().recip())
}

/// Shape and rate of the state-precision proposal.
pub fn precision_proposal(path: &[f64], rho: f64, prior: &VolatilityPrior) -> (f64, f64) {
    let ssr: f64 = (1..path.len()).map(|t| (path[t] - rho * path[t - 1]).powi(2)).sum();
    let shape = prior.precision_shape + 0.5 * (path.len() as f64 - 1.0);
    (shape, prior.precision_rate + 0.5 * ssr)
}

/// Updates ρⱼ and σ²ⱼ for every series. Each proposal is the conditional that
/// ignores the stationary start; an MH step with the start's factor makes the
/// update exact while drawing a fixed number of variates.
pub fn sample_ar_params<R: Rng + ?Sized>(
    vol: &mut VolatilityState,
    prior: &VolatilityPrior,
    rng: &mut R,
) -> Acceptance {
    let (t_eff, m) = vol.log_vols.shape();
    let mut acc = Acceptance::default();
    let bound = prior.rho_bound;
    for j in 0..m {
        let path: Vec<f64> = vol.log_vols.column(j).iter().copied().collect();
        let d0 = path[0];
        let (rho, sigma2) = (vol.rho[j], vol.sigma2[j]);

        let (mean, sd) = rho_proposal(&path, sigma2, prior);
        let cand = truncated_normal(rng, mean, sd, -bound, bound);
        let u: f64 = rng.random();
        let rho = if u.ln() < initial_term(d0, cand, sigma2) - initial_term(d0, rho, sigma2) {
            acc.accepted += 1;
            cand
        } else {
            rho
        };

        let (shape, rate) = precision_proposal(&path, rho, prior);
        let cand = 1.0 / gamma_rate(rng, shape, rate);
        let u: f64 = rng.random();
        let sigma2 = if u.ln() < initial_term(d0, rho, cand) - initial_term(d0, rho, sigma2) {
            acc.accepted += 1;
            cand
        } else {
            sigma2
        };
        acc.proposed += 2;
        vol.rho[j] = rho;
        vol.sigma2[j] = sigma2;
        debug_assert!(t_eff >= 1);
    }
    acc
}

/// Simulates a log-volatility path of length `t` from the stationary AR(1).
pub fn simulate_stationary_path<R: Rng + ?Sized>(t: usize, rho: f64, sigma2: f64, rng: &mut R) -> DVector<f64> {
    let mut out = DVector::zeros(t);
    let sd = sigma2.sqrt();
    let mut d = sd / (1.0 - rho * rho).sqrt() * std_normal(rng);
    for s in 0..t {
        if s > 0 {
            d = rho * d + sd * std_normal(rng);
        }
        out[s] = d;
    }
    out
}
