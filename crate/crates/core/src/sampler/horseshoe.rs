//! Horseshoe scales via the inverse-gamma auxiliary representation
//! (half-Cauchy scale = inverse gamma mixture of inverse gammas).

use nalgebra::DVector;
use rand::Rng;

use crate::model::HorseshoeState;
use crate::rng::inv_gamma;

/// Updates local scales, global scale and both auxiliaries given `a`.
pub fn horseshoe_update<R: Rng + ?Sized>(a: &DVector<f64>, state: &mut HorseshoeState, rng: &mut R) {
    let k = a.len();
    let d2 = state.global;
    for j in 0..k {
        let rate = 1.0 / state.local_aux[j] + a[j] * a[j] / (2.0 * d2);
        state.local[j] = inv_gamma(rng, 1.0, rate);
    }
    let ss: f64 = (0..k).map(|j| a[j] * a[j] / state.local[j]).sum();
    state.global = inv_gamma(rng, 0.5 * (k as f64 + 1.0), 1.0 / state.global_aux + 0.5 * ss);
    for j in 0..k {
        state.local_aux[j] = inv_gamma(rng, 1.0, 1.0 + 1.0 / state.local[j]);
    }
    state.global_aux = inv_gamma(rng, 1.0, 1.0 + 1.0 / state.global);
}

/// Draws the scales from the prior: c ~ C⁺(0, 1), d ~ C⁺(0, 1).
pub fn sample_horseshoe_prior<R: Rng + ?Sized>(k: usize, rng: &mut R) -> HorseshoeState {
    let local_aux = DVector::from_fn(k, |_, _| inv_gamma(rng, 0.5, 1.0));
    let local = DVector::from_fn(k, |j, _| inv_gamma(rng, 0.5, 1.0 / local_aux[j]));
    let global_aux = inv_gamma(rng, 0.5, 1.0);
    let global = inv_gamma(rng, 0.5, 1.0 / global_aux);
    HorseshoeState { local, global, local_aux, global_aux }
}
