//! Random streams and the handful of variate generators the samplers share.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

/// RNG used by every chain. ChaCha gives cheap independent streams.
pub type ChainRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under master `seed`.
pub fn substream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a master seed with a path of indices (cell, replication, ...) into
/// a fresh seed. splitmix64 finaliser.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = master ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h = h.wrapping_add(p.wrapping_mul(0xBF58_476D_1CE4_E5B9)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma with shape/rate parameterisation.
pub fn gamma_rate<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0)
        .expect("gamma shape must be positive")
        .sample(rng);
    g / rate
}

/// Inverse gamma with density b^a / Γ(a) x^{-a-1} exp(-b/x).
pub fn inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0)
        .expect("inverse gamma shape must be positive")
        .sample(rng);
    rate / g
}

pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b).expect("beta parameters must be positive").sample(rng)
}

/// Standard normal CDF, accurate in the lower tail.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Normal(mean, sd²) truncated to [lo, hi], drawn by CDF inversion with a
/// single uniform so the number of variates consumed never varies.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // Work in whichever tail keeps the CDF values away from 1.
    let (a, b, flip) = if a > 0.0 { (-b, -a, true) } else { (a, b, false) };
    let pa = norm_cdf(a);
    let pb = norm_cdf(b);
    let z = if pb - pa <= f64::MIN_POSITIVE {
        // Interval lies far in the tail; the mass piles up at the near end.
        b
    } else {
        let p = (pa + u * (pb - pa)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        norm_quantile(p).clamp(a, b)
    };
    let z = if flip { -z } else { z };
    mean + sd * z
}

/// Draws an index from unnormalised log-weights.
pub fn categorical_from_log<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> usize {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // Rounding can leave u marginally above the last weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
