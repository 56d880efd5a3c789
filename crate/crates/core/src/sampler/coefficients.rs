//! Equation-by-equation draw of the VAR coefficients.
//!
//! With Ω = B₀ᵀB₀ (B₀ lower triangular) the scaled residuals ε̃ₜ = Dₜ⁻¹εₜ
//! satisfy B₀ε̃ₜ ~ N(0, I), and row i of B₀ε̃ₜ involves only equations ≤ i.
//! Conditional on all other equations, equation j is therefore an ordinary
//! Gaussian regression built from rows j..M.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{chol_inverse, cholesky_lower, sample_gaussian_canonical};
use crate::model::{VarCoefficients, VarData};

/// Stacked regression (Y⁽ʲ⁾, X⁽ʲ⁾) for equation `j` (0-based): rows
/// i = j..M of B₀ applied to the scaled residuals, with equation j's own
/// coefficients set to zero on the left-hand side.
pub fn equation_transform(
    j: usize,
    data: &VarData,
    coeffs: &VarCoefficients,
    b0: &DMatrix<f64>,
    log_vols: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (t, m) = data.y.shape();
    let kx = data.n_regressors();
    if j >= m || b0.shape() != (m, m) || log_vols.shape() != (t, m) || coeffs.n_regressors() != kx {
        return Err(Error::Dimension(format!("equation transform for equation {j} of {m}")));
    }
    let mut b = coeffs.matrix().clone();
    b.column_mut(j).fill(0.0);
    let z = (&data.y - &data.x * &b).zip_map(log_vols, |e, d| e * (-0.5 * d).exp());
    let rows = (m - j) * t;
    let mut y_out = DVector::zeros(rows);
    let mut x_out = DMatrix::zeros(rows, kx);
    for i in j..m {
        let block = (i - j) * t;
        for s in 0..t {
            let mut v = 0.0;
            for k in 0..=i {
                v += b0[(i, k)] * z[(s, k)];
            }
            y_out[block + s] = v;
            let scale = b0[(i, j)] * (-0.5 * log_vols[(s, j)]).exp();
            for c in 0..kx {
                x_out[(block + s, c)] = scale * data.x[(s, c)];
            }
        }
    }
    Ok((y_out, x_out))
}

/// Posterior mean and covariance of a Gaussian regression with unit noise
/// variance and independent N(prior_mean, prior_var) coefficients.
pub fn coeff_posterior_moments(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    prior_mean: &DVector<f64>,
    prior_var: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = prior_mean.len();
    if prior_var.len() != k || x.ncols() != k || x.nrows() != y.len() {
        return Err(Error::Dimension("regression moments: inconsistent shapes".into()));
    }
    if prior_var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("prior variances must be positive".into()));
    }
    let mut precision = x.tr_mul(x);
    let mut linear = x.tr_mul(y);
    for i in 0..k {
        precision[(i, i)] += 1.0 / prior_var[i];
        linear[i] += prior_mean[i] / prior_var[i];
    }
    let l = cholesky_lower(&precision)?;
    let cov = chol_inverse(&l);
    let mean = &cov * linear;
    Ok((mean, cov))
}

/// Precision matrix and linear term of equation `j`'s conditional, built
/// directly from the scaled residuals without stacking.
///
/// `scaled` holds ε̃ for the current coefficients; column j is ignored.
pub(crate) fn equation_canonical(
    j: usize,
    data: &VarData,
    omega: &DMatrix<f64>,
    weights: &DMatrix<f64>,
    scaled: &DMatrix<f64>,
    prior_var: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let (t, m) = data.y.shape();
    let omega_jj = omega[(j, j)];
    let w = weights.column(j);
    let mut target = DVector::zeros(t);
    for s in 0..t {
        let mut cross = 0.0;
        for k in 0..m {
            if k != j {
                cross += omega[(j, k)] * scaled[(s, k)];
            }
        }
        target[s] = cross + omega_jj * w[s] * data.y[(s, j)];
    }
    let mut xw = data.x.clone();
    for (s, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[s];
    }
    let mut precision = xw.tr_mul(&xw) * omega_jj;
    let linear = xw.tr_mul(&target);
    for (i, v) in prior_var.iter().enumerate() {
        precision[(i, i)] += 1.0 / v;
    }
    (precision, linear)
}

/// Draws every equation in turn, updating `coeffs` in place so that each
/// equation conditions on the already-updated ones. `prior_var` is indexed
/// like [`VarCoefficients::to_vec`].
pub fn sample_coefficients<R: Rng + ?Sized>(
    coeffs: &mut VarCoefficients,
    data: &VarData,
    omega: &DMatrix<f64>,
    log_vols: &DMatrix<f64>,
    prior_var: &[f64],
    rng: &mut R,
) -> Result<()> {
    let (t, m) = data.y.shape();
    let kx = data.n_regressors();
    if prior_var.len() != kx * m {
        return Err(Error::Dimension(format!("{} prior variances for {} coefficients", prior_var.len(), kx * m)));
    }
    let weights = log_vols.map(|d| (-0.5 * d).exp());
    let mut scaled = (&data.y - &data.x * coeffs.matrix()).component_mul(&weights);
    for j in 0..m {
        let (precision, linear) =
            equation_canonical(j, data, omega, &weights, &scaled, &prior_var[j * kx..(j + 1) * kx]);
        let alpha = sample_gaussian_canonical(&precision, &linear, rng)?;
        coeffs.matrix_mut().set_column(j, &alpha);
        let fitted = &data.x * &alpha;
        for s in 0..t {
            scaled[(s, j)] = weights[(s, j)] * (data.y[(s, j)] - fitted[s]);
        }
    }
    Ok(())
}
