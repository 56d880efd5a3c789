//! Data model of the VAR: the observation panel, configuration, every block of
//! the Gibbs state, and the residual algebra they share.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, reverse_cholesky_lower, spd_inverse, symmetrize};
use crate::partition::{GibbsPriorSpec, Partition};

/// T×M panel of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    values: DMatrix<f64>,
    names: Vec<String>,
    dates: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    pub fn new(values: DMatrix<f64>, names: Vec<String>, dates: Option<Vec<String>>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Data("panel has no observations".into()));
        }
        if values.ncols() < 2 {
            return Err(Error::Data(format!("need at least two series, got {}", values.ncols())));
        }
        if names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if let Some(d) = &dates {
            if d.len() != values.nrows() {
                return Err(Error::Dimension(format!("{} dates for {} rows", d.len(), values.nrows())));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Data(format!("non-finite value at row {r}, column `{}`", names[c])));
        }
        Ok(Self { values, names, dates })
    }

    /// Panel with generic names `y1..yM`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|i| format!("y{i}")).collect();
        Self::new(values, names, None)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    /// First `rows` observations.
    pub fn head(&self, rows: usize) -> Result<Self> {
        if rows == 0 || rows > self.n_obs() {
            return Err(Error::Dimension(format!("cannot take {rows} of {} rows", self.n_obs())));
        }
        Self::new(
            self.values.rows(0, rows).into_owned(),
            self.names.clone(),
            self.dates.as_ref().map(|d| d[..rows].to_vec()),
        )
    }

    /// Panel restricted to the given columns.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_series()) {
            return Err(Error::Dimension(format!("column {bad} out of range")));
        }
        let values = DMatrix::from_fn(self.n_obs(), columns.len(), |r, c| self.values[(r, columns[c])]);
        let names = columns.iter().map(|&c| self.names[c].clone()).collect();
        Self::new(values, names, self.dates.clone())
    }

    /// Each column demeaned and scaled to unit sample standard deviation.
    pub fn standardized(&self) -> Result<Self> {
        let t = self.n_obs() as f64;
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            let mean = col.sum() / t;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0).max(1.0)).sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            col.apply(|v| *v = (*v - mean) / sd);
        }
        Self::new(values, self.names.clone(), self.dates.clone())
    }
}

/// Which prior governs the edge-inclusion probabilities of Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkPrior {
    /// Block-model probabilities with a Gibbs-type prior on the blocks.
    Sbm,
    /// Fixed inclusion probability for every pair.
    Ssvs {
        #[serde(default = "half")]
        inclusion: f64,
    },
    /// Every edge in the slab: no shrinkage on Ω beyond the slab itself.
    Dense,
}

fn half() -> f64 {
    0.5
}

impl NetworkPrior {
    pub fn label(&self) -> &'static str {
        match self {
            NetworkPrior::Sbm => "SBM",
            NetworkPrior::Ssvs { .. } => "SSVS",
            NetworkPrior::Dense => "BASE",
        }
    }
}

/// Prior on the VAR coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientPrior {
    Horseshoe,
    /// Independent N(0, variance) on every coefficient.
    Normal { variance: f64 },
}

/// Priors on the log-volatility AR(1) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolatilityPrior {
    pub rho_mean: f64,
    pub rho_var: f64,
    pub rho_bound: f64,
    /// Gamma shape and rate on the state-equation precision.
    pub precision_shape: f64,
    pub precision_rate: f64,
}

impl Default for VolatilityPrior {
    fn default() -> Self {
        Self { rho_mean: 0.7, rho_var: 0.1, rho_bound: 0.99, precision_shape: 10.0, precision_rate: 2.0 }
    }
}

/// Sampler and prior settings for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarConfig {
    pub lags: usize,
    pub include_intercept: bool,
    pub n_draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Spike variance multiplier c (spike variance is c·τ²).
    pub spike_factor: f64,
    pub slab_shape: f64,
    pub slab_rate: f64,
    pub edge_a: f64,
    pub edge_b: f64,
    pub partition_prior: GibbsPriorSpec,
    pub network: NetworkPrior,
    pub coefficient_prior: CoefficientPrior,
    /// Rate of the exponential prior on the diagonal of Ω; 0 is flat.
    pub diag_rate: f64,
    pub stochastic_volatility: bool,
    pub volatility_prior: VolatilityPrior,
    /// Visit nodes in random order in the block-assignment sweep.
    pub random_sweep_order: bool,
    /// Keep complete log-volatility paths in the draw store.
    pub store_full_paths: bool,
}

impl Default for VarConfig {
    fn default() -> Self {
        Self {
            lags: 1,
            include_intercept: true,
            n_draws: 15_000,
            burn_in: 5_000,
            thin: 2,
            seed: 0,
            spike_factor: 2.5f64.powi(-5),
            slab_shape: 5.0,
            slab_rate: 4.0,
            edge_a: 1.0,
            edge_b: 1.0,
            partition_prior: GibbsPriorSpec::default(),
            network: NetworkPrior::Sbm,
            coefficient_prior: CoefficientPrior::Horseshoe,
            diag_rate: 0.0,
            stochastic_volatility: true,
            volatility_prior: VolatilityPrior::default(),
            random_sweep_order: false,
            store_full_paths: false,
        }
    }
}

impl VarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.lags == 0 {
            return bad("lags must be positive");
        }
        if self.n_draws == 0 || self.thin == 0 {
            return bad("n_draws and thin must be positive");
        }
        if self.burn_in >= self.n_draws {
            return bad("burn_in must be smaller than n_draws");
        }
        if !(self.spike_factor > 0.0 && self.spike_factor < 1.0) {
            return bad("spike_factor must lie in (0, 1)");
        }
        for (name, v) in [
            ("slab_shape", self.slab_shape),
            ("slab_rate", self.slab_rate),
            ("edge_a", self.edge_a),
            ("edge_b", self.edge_b),
            ("volatility_prior.rho_var", self.volatility_prior.rho_var),
            ("volatility_prior.precision_shape", self.volatility_prior.precision_shape),
            ("volatility_prior.precision_rate", self.volatility_prior.precision_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.diag_rate >= 0.0 && self.diag_rate.is_finite()) {
            return bad("diag_rate must be non-negative");
        }
        let bound = self.volatility_prior.rho_bound;
        if !(bound > 0.0 && bound < 1.0) {
            return bad("volatility_prior.rho_bound must lie in (0, 1)");
        }
        if let NetworkPrior::Ssvs { inclusion } = self.network {
            if !(0.0..=1.0).contains(&inclusion) {
                return bad("SSVS inclusion probability must lie in [0, 1]");
            }
        }
        if let CoefficientPrior::Normal { variance } = self.coefficient_prior {
            if !(variance > 0.0 && variance.is_finite()) {
                return bad("normal coefficient prior variance must be positive");
            }
        }
        self.partition_prior.validate()
    }

    /// Number of draws the chain keeps.
    pub fn retained_draws(&self) -> usize {
        (self.n_draws - self.burn_in) / self.thin
    }

    /// Whether sweep `i` (0-based) is stored.
    pub fn is_retained(&self, i: usize) -> bool {
        i >= self.burn_in && (i - self.burn_in + 1) % self.thin == 0
    }
}

/// Coefficients stored as the Kx×M matrix B with yₜᵀ = xₜᵀB, where
/// xₜ = (1, yₜ₋₁ᵀ, …, yₜ₋ₚᵀ) (the leading 1 only with an intercept).
#[derive(Debug, Clone, PartialEq)]
pub struct VarCoefficients {
    m: usize,
    lags: usize,
    intercept: bool,
    matrix: DMatrix<f64>,
}

impl VarCoefficients {
    pub fn zeros(m: usize, lags: usize, intercept: bool) -> Self {
        let rows = usize::from(intercept) + m * lags;
        Self { m, lags, intercept, matrix: DMatrix::zeros(rows, m) }
    }

    pub fn from_matrix(matrix: DMatrix<f64>, m: usize, lags: usize, intercept: bool) -> Result<Self> {
        let rows = usize::from(intercept) + m * lags;
        if matrix.nrows() != rows || matrix.ncols() != m {
            return Err(Error::Dimension(format!(
                "coefficient matrix is {}x{}, expected {rows}x{m}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { m, lags, intercept, matrix })
    }

    /// Builds from A₁..A_P (each M×M, row i = equation i) and an intercept.
    pub fn from_parts(lag_matrices: &[DMatrix<f64>], intercept: Option<&DVector<f64>>) -> Result<Self> {
        let lags = lag_matrices.len();
        let m = lag_matrices.first().map(|a| a.nrows()).ok_or_else(|| {
            Error::Dimension("at least one lag matrix is required".into())
        })?;
        let mut out = Self::zeros(m, lags, intercept.is_some());
        if let Some(c) = intercept {
            if c.len() != m {
                return Err(Error::Dimension(format!("intercept has length {}, expected {m}", c.len())));
            }
            for i in 0..m {
                out.matrix[(0, i)] = c[i];
            }
        }
        for (p, a) in lag_matrices.iter().enumerate() {
            if a.nrows() != m || a.ncols() != m {
                return Err(Error::Dimension(format!("lag matrix {} is not {m}x{m}", p + 1)));
            }
            out.set_lag_matrix(p + 1, a);
        }
        Ok(out)
    }

    pub fn n_series(&self) -> usize {
        self.m
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Regressors per equation.
    pub fn n_regressors(&self) -> usize {
        self.matrix.nrows()
    }

    /// Total coefficient count K.
    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.matrix
    }

    fn lag_offset(&self, p: usize) -> usize {
        usize::from(self.intercept) + (p - 1) * self.m
    }

    /// A_p with (i, k) the effect of y_{k,t−p} on y_{i,t}. `p` is 1-based.
    pub fn lag_matrix(&self, p: usize) -> DMatrix<f64> {
        assert!(p >= 1 && p <= self.lags, "lag {p} out of range");
        let off = self.lag_offset(p);
        DMatrix::from_fn(self.m, self.m, |i, k| self.matrix[(off + k, i)])
    }

    pub fn set_lag_matrix(&mut self, p: usize, a: &DMatrix<f64>) {
        assert!(p >= 1 && p <= self.lags, "lag {p} out of range");
        let off = self.lag_offset(p);
        for i in 0..self.m {
            for k in 0..self.m {
                self.matrix[(off + k, i)] = a[(i, k)];
            }
        }
    }

    /// Intercept vector (zeros when the model has none).
    pub fn intercept(&self) -> DVector<f64> {
        if self.intercept {
            self.matrix.row(0).transpose()
        } else {
            DVector::zeros(self.m)
        }
    }

    /// Equation-major vec: all regressors of equation 1, then equation 2, ...
    pub fn to_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(self.matrix.as_slice())
    }

    pub fn from_vec(vec: &DVector<f64>, m: usize, lags: usize, intercept: bool) -> Result<Self> {
        let rows = usize::from(intercept) + m * lags;
        if vec.len() != rows * m {
            return Err(Error::Dimension(format!("vec has length {}, expected {}", vec.len(), rows * m)));
        }
        Ok(Self { m, lags, intercept, matrix: DMatrix::from_column_slice(rows, m, vec.as_slice()) })
    }

    /// Companion matrix of the lag polynomial (MP×MP).
    pub fn companion(&self) -> DMatrix<f64> {
        let (m, p) = (self.m, self.lags);
        let mut c = DMatrix::zeros(m * p, m * p);
        for lag in 1..=p {
            let a = self.lag_matrix(lag);
            c.view_mut((0, (lag - 1) * m), (m, m)).copy_from(&a);
        }
        for i in m..m * p {
            c[(i, i - m)] = 1.0;
        }
        c
    }

    /// Conditional mean of y_{t} given the lag rows, most recent first.
    pub fn predict(&self, recent: &[DVector<f64>]) -> DVector<f64> {
        let mut mean = self.intercept();
        for p in 1..=self.lags {
            mean += self.lag_matrix(p) * &recent[p - 1];
        }
        mean
    }
}

/// Regressand and regressor matrices over the effective sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VarData {
    /// (T−P)×M.
    pub y: DMatrix<f64>,
    /// (T−P)×Kx.
    pub x: DMatrix<f64>,
    pub lags: usize,
    pub intercept: bool,
}

impl VarData {
    pub fn new(panel: &TimeSeriesPanel, lags: usize, intercept: bool) -> Result<Self> {
        Self::from_values(panel.values(), lags, intercept)
    }

    pub fn from_values(values: &DMatrix<f64>, lags: usize, intercept: bool) -> Result<Self> {
        let (t, m) = values.shape();
        if t <= lags {
            return Err(Error::InsufficientData { rows: t, lags });
        }
        let t_eff = t - lags;
        let kx = usize::from(intercept) + m * lags;
        let y = values.rows(lags, t_eff).into_owned();
        let off = usize::from(intercept);
        let x = DMatrix::from_fn(t_eff, kx, |r, c| {
            if intercept && c == 0 {
                1.0
            } else {
                let c = c - off;
                let (p, k) = (c / m + 1, c % m);
                values[(lags + r - p, k)]
            }
        });
        Ok(Self { y, x, lags, intercept })
    }

    pub fn n_obs(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_regressors(&self) -> usize {
        self.x.ncols()
    }

    /// Y − X·B.
    pub fn residuals(&self, coeffs: &VarCoefficients) -> Result<DMatrix<f64>> {
        if coeffs.n_regressors() != self.n_regressors() || coeffs.n_series() != self.n_series() {
            return Err(Error::Dimension("coefficients do not match the design".into()));
        }
        Ok(&self.y - &self.x * coeffs.matrix())
    }
}

/// yₜ − intercept − Σ A_p yₜ₋ₚ over the effective sample.
pub fn compute_residuals(panel: &TimeSeriesPanel, coeffs: &VarCoefficients) -> Result<DMatrix<f64>> {
    if coeffs.n_series() != panel.n_series() {
        return Err(Error::Dimension(format!(
            "coefficients for {} series, panel has {}",
            coeffs.n_series(),
            panel.n_series()
        )));
    }
    VarData::new(panel, coeffs.lags(), coeffs.has_intercept())?.residuals(coeffs)
}

/// Divides residuals by exp(d/2) and returns them with their cross-product.
pub fn rescale_residuals(
    residuals: &DMatrix<f64>,
    log_vols: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if residuals.shape() != log_vols.shape() {
        return Err(Error::Dimension(format!(
            "residuals are {:?}, log-volatilities {:?}",
            residuals.shape(),
            log_vols.shape()
        )));
    }
    if log_vols.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("log-volatilities".into()));
    }
    let scaled = residuals.zip_map(log_vols, |e, d| e * (-0.5 * d).exp());
    let cross = scaled.tr_mul(&scaled);
    Ok((scaled, cross))
}

/// Σₜ = Dₜ Ω⁻¹ Dₜ with Dₜ = diag(exp(dₜ/2)).
pub fn covariance_at_t(precision: &PrecisionState, log_vols: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = precision.dim();
    if log_vols.len() != m {
        return Err(Error::Dimension(format!("{} log-volatilities for {m} series", log_vols.len())));
    }
    let inv = spd_inverse(precision.omega())?;
    let s: Vec<f64> = log_vols.iter().map(|d| (0.5 * d).exp()).collect();
    let mut cov = DMatrix::from_fn(m, m, |i, j| s[i] * inv[(i, j)] * s[j]);
    symmetrize(&mut cov);
    Ok(cov)
}

/// Log-volatility paths and their AR(1) parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityState {
    /// (T−P)×M, row t holds d_{·,t}.
    pub log_vols: DMatrix<f64>,
    pub rho: DVector<f64>,
    pub sigma2: DVector<f64>,
}

impl VolatilityState {
    pub fn constant(t_eff: usize, m: usize, rho: f64, sigma2: f64) -> Self {
        Self {
            log_vols: DMatrix::zeros(t_eff, m),
            rho: DVector::from_element(m, rho),
            sigma2: DVector::from_element(m, sigma2),
        }
    }

    pub fn last_row(&self) -> DVector<f64> {
        self.log_vols.row(self.log_vols.nrows() - 1).transpose()
    }

    pub fn check(&self, bound: f64) -> Result<()> {
        if self.log_vols.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("log-volatilities".into()));
        }
        if self.rho.iter().any(|r| !(r.abs() <= bound)) {
            return Err(Error::NonFinite("log-volatility persistence".into()));
        }
        if self.sigma2.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::NonFinite("log-volatility innovation variance".into()));
        }
        Ok(())
    }
}

/// Ω together with its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionState {
    omega: DMatrix<f64>,
    chol: DMatrix<f64>,
}

/// Asymmetry above which an update is reported rather than silently fixed.
pub const ASYMMETRY_LIMIT: f64 = 1e-8;

impl PrecisionState {
    /// Symmetrizes and factorizes; adds a small ridge only if factorization fails.
    pub fn new(mut omega: DMatrix<f64>) -> Result<Self> {
        if !omega.is_square() {
            return Err(Error::Dimension("precision matrix must be square".into()));
        }
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("precision matrix".into()));
        }
        let scale = omega.diagonal().abs().max().max(1.0);
        let asym = symmetrize(&mut omega);
        if asym > ASYMMETRY_LIMIT * scale {
            return Err(Error::NotSymmetric { max_diff: asym });
        }
        match cholesky_lower(&omega) {
            Ok(chol) => Ok(Self { omega, chol }),
            Err(Error::NotPositiveDefinite { pivot }) => {
                let m = omega.nrows();
                let jitter = 1e-10 * omega.trace() / m as f64;
                log::warn!("precision matrix not positive definite at pivot {pivot}; adding jitter {jitter:e}");
                for i in 0..m {
                    omega[(i, i)] += jitter;
                }
                let chol = cholesky_lower(&omega)?;
                Ok(Self { omega, chol })
            }
            Err(e) => Err(e),
        }
    }

    /// Accepts only an exactly symmetric, positive definite matrix: no
    /// symmetrisation and no jitter.
    pub fn strict(omega: DMatrix<f64>) -> Result<Self> {
        if !omega.is_square() {
            return Err(Error::Dimension("precision matrix must be square".into()));
        }
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("precision matrix".into()));
        }
        let asym = crate::linalg::max_asymmetry(&omega);
        if asym > 0.0 {
            return Err(Error::NotSymmetric { max_diff: asym });
        }
        let chol = cholesky_lower(&omega)?;
        Ok(Self { omega, chol })
    }

    pub fn identity(m: usize) -> Self {
        Self { omega: DMatrix::identity(m, m), chol: DMatrix::identity(m, m) }
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// Lower L with L·Lᵀ = Ω.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Lower B₀ with B₀ᵀB₀ = Ω, used to triangularize the coefficient step.
    pub fn b0(&self) -> Result<DMatrix<f64>> {
        reverse_cholesky_lower(&self.omega)
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        crate::linalg::chol_inverse(&self.chol)
    }
}

/// Symmetric binary adjacency matrix with empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Adjacency {
    n: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self { n, cells: vec![false; n * n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                a.set(i, j, true);
            }
        }
        a
    }

    /// Adjacency from a predicate evaluated once per unordered pair i < j.
    pub fn from_pairs(n: usize, mut edge: impl FnMut(usize, usize) -> bool) -> Self {
        let mut a = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if edge(i, j) {
                    a.set(i, j, true);
                }
            }
        }
        a
    }

    /// Reads a 0/1 matrix; any nonzero off-diagonal entry is an edge.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Dimension("adjacency must be square".into()));
        }
        let mut a = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] != 0.0) != (m[(j, i)] != 0.0) {
                    return Err(Error::NotSymmetric { max_diff: 1.0 });
                }
                a.set(i, j, m[(i, j)] != 0.0);
            }
        }
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    /// Sets the pair (i, j) and its mirror. The diagonal stays empty.
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        if i == j {
            return;
        }
        self.cells[i * self.n + j] = value;
        self.cells[j * self.n + i] = value;
    }

    pub fn n_edges(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count() / 2
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if self.get(i, j) { 1.0 } else { 0.0 })
    }

    /// Row-major 0/1 bytes.
    pub fn as_bytes(&self) -> Vec<u8> {
        self.cells.iter().map(|&c| u8::from(c)).collect()
    }

    pub fn from_bytes(n: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != n * n {
            return Err(Error::Dimension(format!("{} adjacency bytes for n = {n}", bytes.len())));
        }
        let mut a = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if bytes[i * n + j] != bytes[j * n + i] {
                    return Err(Error::NotSymmetric { max_diff: 1.0 });
                }
                a.set(i, j, bytes[i * n + j] != 0);
            }
        }
        Ok(a)
    }

    /// Relabels nodes: node i of the output is node perm[i] of self.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_pairs(self.n, |i, j| self.get(perm[i], perm[j]))
    }
}

/// Network indicators and slab variances.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSlabState {
    pub adjacency: Adjacency,
    /// Symmetric; only the off-diagonal entries are used.
    pub slab_vars: DMatrix<f64>,
}

/// Block assignments and block edge probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmState {
    pub partition: Partition,
    /// H×H symmetric with entries in [0, 1].
    pub edge_probs: DMatrix<f64>,
}

/// Horseshoe local and global scales with their auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct HorseshoeState {
    pub local: DVector<f64>,
    pub global: f64,
    pub local_aux: DVector<f64>,
    pub global_aux: f64,
}

impl HorseshoeState {
    pub fn ones(k: usize) -> Self {
        Self {
            local: DVector::from_element(k, 1.0),
            global: 1.0,
            local_aux: DVector::from_element(k, 1.0),
            global_aux: 1.0,
        }
    }

    /// Prior variance c²ⱼ·d² of coefficient j.
    pub fn prior_variance(&self, j: usize) -> f64 {
        self.local[j] * self.global
    }
}

/// The complete Gibbs state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub coeffs: VarCoefficients,
    pub horseshoe: HorseshoeState,
    pub vol: VolatilityState,
    pub precision: PrecisionState,
    pub spike_slab: SpikeSlabState,
    pub sbm: SbmState,
}

impl ModelState {
    /// Checks every block for the invariants of its type.
    pub fn check(&self, rho_bound: f64) -> Result<()> {
        if self.coeffs.matrix().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("VAR coefficients".into()));
        }
        let hs = &self.horseshoe;
        if hs.local.iter().chain(hs.local_aux.iter()).chain([hs.global, hs.global_aux].iter())
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonFinite("horseshoe scales".into()));
        }
        self.vol.check(rho_bound)?;
        let omega = self.precision.omega();
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("precision matrix".into()));
        }
        let tau = &self.spike_slab.slab_vars;
        let m = omega.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                if !(tau[(i, j)] > 0.0 && tau[(i, j)].is_finite()) {
                    return Err(Error::NonFinite("slab variances".into()));
                }
            }
        }
        let pi = &self.sbm.edge_probs;
        if pi.nrows() != self.sbm.partition.n_clusters() || pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::NonFinite("block edge probabilities".into()));
        }
        Ok(())
    }
}
