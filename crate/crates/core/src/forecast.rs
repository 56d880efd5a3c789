//! Iterated predictive simulation, log predictive likelihoods and recursive
//! out-of-sample scoring.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::draws::Draw;
use crate::error::{Error, Result};
use crate::linalg::{backward_substitute_transpose, cholesky_lower, forward_substitute, spd_inverse};
use crate::model::{TimeSeriesPanel, VarConfig, VarData};
use crate::rng::{derive_seed, log_sum_exp, seeded, std_normal};
use crate::sampler::run_chain_on;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// State needed to simulate forward from one retained draw.
struct Forward<'a> {
    draw: &'a Draw,
    chol: DMatrix<f64>,
}

impl<'a> Forward<'a> {
    fn new(draw: &'a Draw) -> Result<Self> {
        Ok(Self { draw, chol: cholesky_lower(&draw.omega)? })
    }

    fn step_vols<R: Rng + ?Sized>(&self, d: &mut DVector<f64>, rng: &mut R) {
        for j in 0..d.len() {
            d[j] = self.draw.rho[j] * d[j] + self.draw.sigma2[j].sqrt() * std_normal(rng);
        }
    }

    fn shock<R: Rng + ?Sized>(&self, d: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(d.len(), |_, _| std_normal(rng));
        let e = backward_substitute_transpose(&self.chol, &z);
        DVector::from_fn(d.len(), |j, _| (0.5 * d[j]).exp() * e[j])
    }
}

/// Simulates y_{T+1..T+h} from one draw. `history` holds the most recent
/// observations, newest first, at least as many as the lag order.
pub fn simulate_path<R: Rng + ?Sized>(
    draw: &Draw,
    history: &[DVector<f64>],
    h: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let p = draw.coeffs.lags();
    if h == 0 || history.len() < p {
        return Err(Error::InvalidParameter(format!("horizon {h} with {} history rows", history.len())));
    }
    let fwd = Forward::new(draw)?;
    let mut recent: Vec<DVector<f64>> = history[..p].to_vec();
    let mut d = draw.last_log_vols.clone();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        fwd.step_vols(&mut d, rng);
        let y = draw.coeffs.predict(&recent) + fwd.shock(&d, rng);
        recent.rotate_right(1);
        recent[0] = y.clone();
        out.push(y);
    }
    Ok(out)
}

/// log N(x | mean, cov) from the lower Cholesky factor of `cov`.
pub fn gaussian_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_lower(cov)?;
    let z = forward_substitute(&l, &(x - mean));
    let k = x.len() as f64;
    let log_diag: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
    Ok(-0.5 * k * LN_2PI - log_diag - 0.5 * z.norm_squared())
}

/// Univariate log N(x | mean, var), evaluated in the same operation order as
/// [`gaussian_log_density`] so the two agree bit for bit.
pub fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let s = var.sqrt();
    let z = (x - mean) / s;
    -0.5 * 1.0 * LN_2PI - s.ln() - 0.5 * (0.0 + z * z)
}

/// Predictive mean and covariance of y_{T+h} for one draw, simulating the
/// path up to T+h−1 and the log-volatilities up to T+h.
fn conditional_moments<R: Rng + ?Sized>(
    fwd: &Forward,
    history: &[DVector<f64>],
    h: usize,
    rng: &mut R,
) -> (DVector<f64>, DMatrix<f64>) {
    let draw = fwd.draw;
    let p = draw.coeffs.lags();
    let mut recent: Vec<DVector<f64>> = history[..p].to_vec();
    let mut d = draw.last_log_vols.clone();
    for _ in 1..h {
        fwd.step_vols(&mut d, rng);
        let y = draw.coeffs.predict(&recent) + fwd.shock(&d, rng);
        recent.rotate_right(1);
        recent[0] = y;
    }
    fwd.step_vols(&mut d, rng);
    let mean = draw.coeffs.predict(&recent);
    let inv = crate::linalg::chol_inverse(&fwd.chol);
    let m = d.len();
    let s: Vec<f64> = d.iter().map(|v| (0.5 * v).exp()).collect();
    let cov = DMatrix::from_fn(m, m, |i, j| s[i] * inv[(i, j)] * s[j]);
    (mean, cov)
}

fn draw_stream(seed: u64, draw: &Draw, h: usize) -> crate::rng::ChainRng {
    seeded(derive_seed(seed, &[draw.sweep as u64, h as u64]))
}

fn log_mean(mut values: Vec<f64>) -> f64 {
    // Sorting makes the estimate independent of draw order.
    values.sort_by(f64::total_cmp);
    log_sum_exp(&values) - (values.len() as f64).ln()
}

fn check_inputs(draws: &[Draw], history: &[DVector<f64>], realized: &DVector<f64>, h: usize) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::InvalidParameter("no draws to average over".into()));
    }
    let m = draws[0].coeffs.n_series();
    if realized.len() != m || h == 0 || history.len() < draws[0].coeffs.lags() {
        return Err(Error::Dimension("predictive inputs do not match the model".into()));
    }
    Ok(())
}

/// Rao-Blackwellised log predictive density of `realized[subset]` at horizon
/// h: a mixture over draws of the exact Gaussian given the simulated path.
/// Each draw uses its own stream keyed by (seed, sweep, h).
pub fn log_predictive_density(
    draws: &[Draw],
    history: &[DVector<f64>],
    realized: &DVector<f64>,
    subset: &[usize],
    h: usize,
    seed: u64,
) -> Result<f64> {
    check_inputs(draws, history, realized, h)?;
    if subset.is_empty() || subset.iter().any(|&i| i >= realized.len()) {
        return Err(Error::InvalidParameter("variable subset is empty or out of range".into()));
    }
    let k = subset.len();
    let x = DVector::from_fn(k, |i, _| realized[subset[i]]);
    let mut logs = Vec::with_capacity(draws.len());
    for draw in draws {
        let fwd = Forward::new(draw)?;
        let (mean, cov) = conditional_moments(&fwd, history, h, &mut draw_stream(seed, draw, h));
        let mu = DVector::from_fn(k, |i, _| mean[subset[i]]);
        let c = DMatrix::from_fn(k, k, |i, j| cov[(subset[i], subset[j])]);
        logs.push(gaussian_log_density(&x, &mu, &c)?);
    }
    Ok(log_mean(logs))
}

/// Marginal log predictive densities of every variable, sharing the simulated
/// paths with [`log_predictive_density`].
pub fn marginal_log_predictive_densities(
    draws: &[Draw],
    history: &[DVector<f64>],
    realized: &DVector<f64>,
    h: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_inputs(draws, history, realized, h)?;
    let m = realized.len();
    let mut logs = vec![Vec::with_capacity(draws.len()); m];
    for draw in draws {
        let fwd = Forward::new(draw)?;
        let (mean, cov) = conditional_moments(&fwd, history, h, &mut draw_stream(seed, draw, h));
        for (j, l) in logs.iter_mut().enumerate() {
            l.push(normal_log_density(realized[j], mean[j], cov[(j, j)]));
        }
    }
    Ok(logs.into_iter().map(log_mean).collect())
}

/// A named set of variable indices scored jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableGroup {
    pub name: String,
    pub indices: Vec<usize>,
}

/// FOCUS (first three variables, or fewer) and ALL.
pub fn default_groups(m: usize) -> Vec<VariableGroup> {
    vec![
        VariableGroup { name: "FOCUS".into(), indices: (0..m.min(3)).collect() },
        VariableGroup { name: "ALL".into(), indices: (0..m).collect() },
    ]
}

/// A model entered into the evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationModel {
    pub label: String,
    pub config: VarConfig,
}

/// Settings of a recursive evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSpec {
    /// First origin: the number of in-sample rows of the first estimation.
    pub eval_start: usize,
    /// Last origin (exclusive); defaults to the panel length.
    pub eval_end: Option<usize>,
    pub horizons: Vec<usize>,
    pub groups: Vec<VariableGroup>,
    /// Variables scored individually.
    pub focus: Vec<usize>,
    pub baseline: String,
    pub seed: u64,
}

/// One score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    /// Number of in-sample rows.
    pub origin: usize,
    pub model: String,
    /// Group name, or variable name for marginal scores.
    pub target: String,
    pub joint: bool,
    pub horizon: usize,
    pub lpl: f64,
}

/// Scores from every origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationResults {
    pub models: Vec<String>,
    pub baseline: String,
    pub rows: Vec<ScoreRow>,
    pub failed_origins: Vec<usize>,
}

impl EvaluationResults {
    fn targets(&self) -> Vec<(String, bool, usize)> {
        let mut keys: Vec<(String, bool, usize)> = Vec::new();
        for r in &self.rows {
            let k = (r.target.clone(), r.joint, r.horizon);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys
    }

    /// Score series of one (model, target, horizon), ordered by origin.
    pub fn series(&self, model: &str, target: &str, horizon: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.model == model && r.target == target && r.horizon == horizon)
            .map(|r| (r.origin, r.lpl))
            .collect();
        v.sort_by_key(|p| p.0);
        v
    }

    /// Mean score per (target, horizon) and model.
    pub fn mean_score(&self, model: &str, target: &str, horizon: usize) -> Option<f64> {
        let s = self.series(model, target, horizon);
        (!s.is_empty()).then(|| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64)
    }

    /// Running mean of (model − baseline) over origins.
    pub fn cumulative_relative(&self, model: &str, target: &str, horizon: usize) -> Vec<(usize, f64)> {
        let a = self.series(model, target, horizon);
        let b = self.series(&self.baseline, target, horizon);
        let mut out = Vec::new();
        let mut sum = 0.0;
        for (k, ((o, x), (_, y))) in a.iter().zip(&b).enumerate() {
            sum += x - y;
            out.push((*o, sum / (k + 1) as f64));
        }
        out
    }

    pub fn write_scores_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["origin", "model", "target", "kind", "horizon", "lpl"])?;
        for r in &self.rows {
            w.write_record([
                r.origin.to_string(),
                r.model.clone(),
                r.target.clone(),
                if r.joint { "joint" } else { "marginal" }.into(),
                r.horizon.to_string(),
                format!("{:.10}", r.lpl),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Target × model table: the baseline as a mean score, other models as
    /// mean differences to it.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let others: Vec<&String> = self.models.iter().filter(|m| **m != self.baseline).collect();
        let mut header = vec!["target".to_string(), "kind".into(), "horizon".into(), self.baseline.clone()];
        header.extend(others.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for (target, joint, h) in self.targets() {
            let base = self.mean_score(&self.baseline, &target, h);
            let mut row = vec![target.clone(), if joint { "joint" } else { "marginal" }.into(), h.to_string()];
            row.push(base.map(|b| format!("{b:.4}")).unwrap_or_default());
            for m in &others {
                row.push(match (self.mean_score(m, &target, h), base) {
                    (Some(v), Some(b)) => format!("{:.4}", v - b),
                    _ => String::new(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long-format running mean differences to the baseline.
    pub fn write_cumulative_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["origin", "model", "target", "horizon", "cumulative_mean_difference"])?;
        for (target, _, h) in self.targets() {
            for m in &self.models {
                for (o, v) in self.cumulative_relative(m, &target, h) {
                    w.write_record([o.to_string(), m.clone(), target.clone(), h.to_string(), format!("{v:.10}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Most recent `p` rows of `values[..end]`, newest first.
pub fn history_before(values: &DMatrix<f64>, end: usize, p: usize) -> Vec<DVector<f64>> {
    (1..=p).map(|k| values.row(end - k).transpose()).collect()
}

/// Scores one model at one origin.
fn score_origin(
    panel: &TimeSeriesPanel,
    model: &EvaluationModel,
    spec: &EvaluationSpec,
    origin: usize,
    model_index: usize,
) -> Result<Vec<ScoreRow>> {
    let values = panel.values();
    let t = values.nrows();
    let sample = panel.head(origin)?;
    let data = VarData::new(&sample, model.config.lags, model.config.include_intercept)?;
    let seed = derive_seed(spec.seed, &[origin as u64, model_index as u64]);
    let config = VarConfig { seed, ..model.config.clone() };
    let out = run_chain_on(&data, &config, &mut seeded(seed))?;
    let draws = out.draws.draws();
    let history = history_before(values, origin, model.config.lags);
    let mut rows = Vec::new();
    for &h in &spec.horizons {
        if origin + h > t {
            continue;
        }
        let realized = values.row(origin + h - 1).transpose();
        let lpl_seed = derive_seed(spec.seed, &[origin as u64, 1 << 32]);
        let marg = marginal_log_predictive_densities(draws, &history, &realized, h, lpl_seed)?;
        for &j in &spec.focus {
            rows.push(ScoreRow {
                origin,
                model: model.label.clone(),
                target: panel.names()[j].clone(),
                joint: false,
                horizon: h,
                lpl: marg[j],
            });
        }
        for g in &spec.groups {
            let lpl = log_predictive_density(draws, &history, &realized, &g.indices, h, lpl_seed)?;
            rows.push(ScoreRow { origin, model: model.label.clone(), target: g.name.clone(), joint: true, horizon: h, lpl });
        }
    }
    Ok(rows)
}

/// Re-estimates every model at each origin and scores the forecasts of the
/// following observations. Origins run in parallel.
pub fn recursive_evaluation(
    panel: &TimeSeriesPanel,
    models: &[EvaluationModel],
    spec: &EvaluationSpec,
) -> Result<EvaluationResults> {
    let t = panel.n_obs();
    let end = spec.eval_end.unwrap_or(t).min(t);
    if spec.eval_start >= end || spec.eval_start == 0 {
        return Err(Error::InvalidParameter(format!(
            "evaluation window [{}, {end}) leaves no forecast origin",
            spec.eval_start
        )));
    }
    if !models.iter().any(|m| m.label == spec.baseline) {
        return Err(Error::InvalidParameter(format!("baseline `{}` is not among the models", spec.baseline)));
    }
    let m = panel.n_series();
    if spec.focus.iter().chain(spec.groups.iter().flat_map(|g| g.indices.iter())).any(|&i| i >= m) {
        return Err(Error::InvalidParameter("variable index out of range".into()));
    }
    let origins: Vec<usize> = (spec.eval_start..end).collect();
    let results: Vec<(usize, Result<Vec<ScoreRow>>)> = origins
        .par_iter()
        .map(|&o| {
            let mut rows = Vec::new();
            for (k, model) in models.iter().enumerate() {
                match score_origin(panel, model, spec, o, k) {
                    Ok(r) => rows.extend(r),
                    Err(e) => return (o, Err(e)),
                }
            }
            (o, Ok(rows))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (o, r) in results {
        match r {
            Ok(r) => rows.extend(r),
            Err(e) => {
                log::warn!("forecast origin {o} failed: {e}");
                failed.push(o);
            }
        }
    }
    Ok(EvaluationResults {
        models: models.iter().map(|m| m.label.clone()).collect(),
        baseline: spec.baseline.clone(),
        rows,
        failed_origins: failed,
    })
}

/// Exact predictive density of y_{T+1} under a homoskedastic draw
/// (σ² = 0, d fixed), used as an analytic reference.
pub fn analytic_one_step_log_density(draw: &Draw, history: &[DVector<f64>], realized: &DVector<f64>) -> Result<f64> {
    let mean = draw.coeffs.predict(history);
    let d: Vec<f64> = draw.last_log_vols.iter().zip(&draw.rho).map(|(v, r)| r * v).collect();
    let inv = spd_inverse(&draw.omega)?;
    let m = d.len();
    let cov = DMatrix::from_fn(m, m, |i, j| (0.5 * d[i]).exp() * inv[(i, j)] * (0.5 * d[j]).exp());
    gaussian_log_density(realized, &mean, &cov)
}
