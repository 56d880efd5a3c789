//! Dense symmetric-matrix helpers built around a Cholesky factorisation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::std_normal;

/// Relative asymmetry accepted by [`cholesky_lower`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Largest |a_ij - a_ji|.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `a` by (a + aᵀ)/2 and returns the asymmetry it removed.
pub fn symmetrize(a: &mut DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            let d = (a[(i, j)] - a[(j, i)]).abs();
            worst = worst.max(d);
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    worst
}

/// Lower-triangular L with positive diagonal and L·Lᵀ = a.
///
/// Reads both triangles only for the symmetry check; the factorisation itself
/// uses the lower triangle.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "cholesky of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { max_diff: asym });
    }
    factor_lower(a)
}

fn factor_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Lower-triangular B with Bᵀ·B = a (the "reverse" Cholesky factor).
///
/// Row i of B·x involves only x_1..x_i, which is what equation-by-equation
/// coefficient sampling needs.
pub fn reverse_cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let flipped = DMatrix::from_fn(n, n, |i, j| a[(n - 1 - i, n - 1 - j)]);
    let l = cholesky_lower(&flipped)?;
    // a = P L Lᵀ P = (P L P)(P Lᵀ P); P L P is upper, so B = (P L P)ᵀ.
    Ok(DMatrix::from_fn(n, n, |i, j| l[(n - 1 - j, n - 1 - i)]))
}

/// Solves L x = b for lower-triangular L.
pub fn forward_substitute(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves Lᵀ x = b for lower-triangular L.
pub fn backward_substitute_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves (L Lᵀ) x = b.
pub fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    backward_substitute_transpose(l, &forward_substitute(l, b))
}

/// Inverse of L Lᵀ given its factor.
pub fn chol_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::<f64>::zeros(n);
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        inv.set_column(j, &col);
    }
    symmetrize(&mut inv);
    inv
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(chol_inverse(&cholesky_lower(a)?))
}

pub fn log_det_from_chol(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Draws from N(Q⁻¹ b, Q⁻¹) given the precision Q and linear term b.
pub fn sample_gaussian_canonical<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let l = cholesky_lower(precision)?;
    let mean = chol_solve(&l, linear);
    let z = DVector::from_fn(precision.nrows(), |_, _| std_normal(rng));
    Ok(mean + backward_substitute_transpose(&l, &z))
}

/// Draws from N(mean, cov).
pub fn sample_gaussian<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let l = cholesky_lower(cov)?;
    let z = DVector::from_fn(mean.len(), |_, _| std_normal(rng));
    Ok(mean + l * z)
}

/// Sub-matrix with row/column `skip` removed.
pub fn without_index(a: &DMatrix<f64>, skip: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let idx: Vec<usize> = (0..n).filter(|&i| i != skip).collect();
    DMatrix::from_fn(n - 1, n - 1, |i, j| a[(idx[i], idx[j])])
}
