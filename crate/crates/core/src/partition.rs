//! Gibbs-type priors over partitions of the M shocks, expressed through their
//! sequential (urn) predictive weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

/// Default Pitman-Yor discount when none is configured.
pub const DEFAULT_PY_DISCOUNT: f64 = 0.25;

/// Number of sequential simulations used by [`expected_clusters_mc`] by default.
pub const DEFAULT_MC_SIMULATIONS: usize = 20_000;

/// A partition of `0..len` with contiguous labels `0..n_clusters`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    /// Accepts labels only if every value in `0..max+1` is used.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_clusters];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "label {missing} is unused but {} clusters are implied",
                n_clusters
            )));
        }
        Ok(Self { labels, n_clusters })
    }

    /// Relabels arbitrary labels by order of first appearance.
    pub fn canonical(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = map.len();
            out.push(*map.entry(l).or_insert(next));
        }
        let n_clusters = map.len();
        Self { labels: out, n_clusters }
    }

    pub fn single_cluster(len: usize) -> Self {
        Self { labels: vec![0; len], n_clusters: usize::from(len > 0) }
    }

    pub fn singletons(len: usize) -> Self {
        Self { labels: (0..len).collect(), n_clusters: len }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Same partition with labels in first-appearance order.
    pub fn canonicalized(&self) -> Self {
        Self::canonical(&self.labels)
    }
}

/// One of the four Gibbs-type partition priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", deny_unknown_fields)]
pub enum GibbsPriorSpec {
    /// Gnedin process, γ ∈ (0, 1).
    #[serde(rename = "GN")]
    Gnedin { gamma: f64 },
    /// Dirichlet-multinomial with concentration β and at most `cap` clusters.
    /// A missing cap means "number of nodes".
    #[serde(rename = "DM")]
    DirichletMultinomial { beta: f64, cap: Option<usize> },
    #[serde(rename = "DP")]
    DirichletProcess { alpha: f64 },
    #[serde(rename = "PY")]
    PitmanYor {
        alpha: f64,
        #[serde(default = "default_discount")]
        discount: f64,
    },
}

fn default_discount() -> f64 {
    DEFAULT_PY_DISCOUNT
}

impl Default for GibbsPriorSpec {
    fn default() -> Self {
        GibbsPriorSpec::Gnedin { gamma: 0.5 }
    }
}

/// Which variant to calibrate; the fixed companion parameter travels along.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PriorVariant {
    #[serde(rename = "GN")]
    Gnedin,
    #[serde(rename = "DM")]
    DirichletMultinomial { cap: Option<usize> },
    #[serde(rename = "DP")]
    DirichletProcess,
    #[serde(rename = "PY")]
    PitmanYor { discount: f64 },
}

impl PriorVariant {
    pub fn name(&self) -> &'static str {
        match self {
            PriorVariant::Gnedin => "GN",
            PriorVariant::DirichletMultinomial { .. } => "DM",
            PriorVariant::DirichletProcess => "DP",
            PriorVariant::PitmanYor { .. } => "PY",
        }
    }

    /// Parses "GN", "DM", "DP" or "PY" with default companion parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "GN" => Ok(PriorVariant::Gnedin),
            "DM" => Ok(PriorVariant::DirichletMultinomial { cap: None }),
            "DP" => Ok(PriorVariant::DirichletProcess),
            "PY" => Ok(PriorVariant::PitmanYor { discount: DEFAULT_PY_DISCOUNT }),
            other => Err(Error::InvalidParameter(format!("unknown partition prior `{other}`"))),
        }
    }

    fn with_parameter(&self, value: f64) -> GibbsPriorSpec {
        match *self {
            PriorVariant::Gnedin => GibbsPriorSpec::Gnedin { gamma: value },
            PriorVariant::DirichletMultinomial { cap } => {
                GibbsPriorSpec::DirichletMultinomial { beta: value, cap }
            }
            PriorVariant::DirichletProcess => GibbsPriorSpec::DirichletProcess { alpha: value },
            PriorVariant::PitmanYor { discount } => GibbsPriorSpec::PitmanYor { alpha: value, discount },
        }
    }
}

impl GibbsPriorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GibbsPriorSpec::Gnedin { .. } => "GN",
            GibbsPriorSpec::DirichletMultinomial { .. } => "DM",
            GibbsPriorSpec::DirichletProcess { .. } => "DP",
            GibbsPriorSpec::PitmanYor { .. } => "PY",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            GibbsPriorSpec::Gnedin { gamma } if !(gamma > 0.0 && gamma < 1.0) => {
                bad(format!("GN gamma must lie in (0, 1), got {gamma}"))
            }
            GibbsPriorSpec::DirichletMultinomial { beta, cap } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    bad(format!("DM beta must be positive, got {beta}"))
                } else if cap == Some(0) {
                    bad("DM cap must be at least 1".into())
                } else {
                    Ok(())
                }
            }
            GibbsPriorSpec::DirichletProcess { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("DP alpha must be positive, got {alpha}"))
            }
            GibbsPriorSpec::PitmanYor { alpha, discount } => {
                if !(0.0..1.0).contains(&discount) {
                    bad(format!("PY discount must lie in [0, 1), got {discount}"))
                } else if !(alpha > -discount && alpha.is_finite()) {
                    bad(format!("PY alpha must exceed -discount, got {alpha}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Fills in the DM cap for a network with `m` nodes.
    pub fn resolved(&self, m: usize) -> Self {
        match *self {
            GibbsPriorSpec::DirichletMultinomial { beta, cap } => GibbsPriorSpec::DirichletMultinomial {
                beta,
                cap: Some(cap.unwrap_or(m).min(m.max(1))),
            },
            ref other => other.clone(),
        }
    }

    fn dm_cap(cap: Option<usize>) -> Result<f64> {
        cap.map(|c| c as f64)
            .ok_or_else(|| Error::InvalidParameter("DM cap must be resolved before use".into()))
    }

    /// Unnormalised weight of joining an existing cluster of size `n_h`
    /// when `allocated` nodes sit in `h` clusters.
    pub fn existing_weight(&self, n_h: usize, allocated: usize, h: usize) -> f64 {
        let n = n_h as f64;
        match *self {
            GibbsPriorSpec::Gnedin { gamma } => (n + 1.0) * (allocated as f64 - h as f64 + gamma),
            GibbsPriorSpec::DirichletMultinomial { beta, .. } => n + beta,
            GibbsPriorSpec::DirichletProcess { .. } => n,
            GibbsPriorSpec::PitmanYor { discount, .. } => n - discount,
        }
    }

    /// Unnormalised weight of opening cluster `h + 1`.
    pub fn new_weight(&self, allocated: usize, h: usize) -> Result<f64> {
        if allocated == 0 {
            return Ok(1.0);
        }
        let hf = h as f64;
        Ok(match *self {
            GibbsPriorSpec::Gnedin { gamma } => hf * hf - hf * gamma,
            GibbsPriorSpec::DirichletMultinomial { beta, cap } => {
                let cap = Self::dm_cap(cap)?;
                (beta * (cap - hf)).max(0.0)
            }
            GibbsPriorSpec::DirichletProcess { alpha } => alpha,
            GibbsPriorSpec::PitmanYor { alpha, discount } => alpha + discount * hf,
        })
    }

    /// Sum of the existing-cluster weights, which depends only on (n, h).
    fn existing_total(&self, allocated: usize, h: usize) -> f64 {
        let (n, hf) = (allocated as f64, h as f64);
        match *self {
            GibbsPriorSpec::Gnedin { gamma } => (n + hf) * (n - hf + gamma),
            GibbsPriorSpec::DirichletMultinomial { beta, .. } => n + hf * beta,
            GibbsPriorSpec::DirichletProcess { .. } => n,
            GibbsPriorSpec::PitmanYor { discount, .. } => n - hf * discount,
        }
    }

    /// Probability that node `allocated + 1` opens a new cluster.
    pub fn new_cluster_probability(&self, allocated: usize, h: usize) -> Result<f64> {
        if allocated == 0 {
            return Ok(1.0);
        }
        let new = self.new_weight(allocated, h)?;
        Ok(new / (new + self.existing_total(allocated, h)))
    }
}

/// Normalised predictive allocation probabilities; the last entry is the new
/// cluster.
pub fn predictive_weights(spec: &GibbsPriorSpec, sizes: &[usize], allocated: usize) -> Result<Vec<f64>> {
    let total: usize = sizes.iter().sum();
    if total != allocated {
        return Err(Error::InvalidPartition(format!(
            "cluster sizes sum to {total} but {allocated} nodes are allocated"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidPartition("empty cluster in size vector".into()));
    }
    if allocated == 0 {
        return Ok(vec![1.0]);
    }
    let h = sizes.len();
    let mut w: Vec<f64> = sizes.iter().map(|&n| spec.existing_weight(n, allocated, h)).collect();
    w.push(spec.new_weight(allocated, h)?);
    if w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{} prior produced an invalid predictive weight",
            spec.name()
        )));
    }
    // Summing in sorted order keeps the result exactly invariant to relabelling.
    let mut sorted = w.clone();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    Ok(w.into_iter().map(|v| v / sum).collect())
}

/// Log prior probability of `partition`, accumulated over the sequential
/// allocation of nodes in index order.
pub fn log_eppf(spec: &GibbsPriorSpec, partition: &Partition) -> Result<f64> {
    let order: Vec<usize> = (0..partition.len()).collect();
    log_eppf_in_order(spec, partition, &order)
}

/// As [`log_eppf`], allocating nodes in the given order.
pub fn log_eppf_in_order(spec: &GibbsPriorSpec, partition: &Partition, order: &[usize]) -> Result<f64> {
    if order.len() != partition.len() {
        return Err(Error::Dimension(format!(
            "allocation order has {} entries for {} nodes",
            order.len(),
            partition.len()
        )));
    }
    let spec = spec.resolved(partition.len());
    // Clusters are opened in order of first appearance along `order`.
    let mut slot = vec![usize::MAX; partition.n_clusters()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut lp = 0.0;
    for (allocated, &node) in order.iter().enumerate() {
        let label = partition.label(node);
        let probs = predictive_weights(&spec, &sizes, allocated)?;
        if slot[label] == usize::MAX {
            lp += probs[sizes.len()].ln();
            slot[label] = sizes.len();
            sizes.push(1);
        } else {
            lp += probs[slot[label]].ln();
            sizes[slot[label]] += 1;
        }
    }
    Ok(lp)
}

/// Draws a partition of `m` nodes from the prior by sequential allocation.
pub fn sample_partition<R: Rng + ?Sized>(spec: &GibbsPriorSpec, m: usize, rng: &mut R) -> Result<Partition> {
    let spec = spec.resolved(m);
    let mut labels = Vec::with_capacity(m);
    let mut sizes: Vec<usize> = Vec::new();
    for allocated in 0..m {
        let probs = predictive_weights(&spec, &sizes, allocated)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = k;
                break;
            }
        }
        if pick == sizes.len() {
            sizes.push(0);
        }
        sizes[pick] += 1;
        labels.push(pick);
    }
    Ok(Partition { labels, n_clusters: sizes.len() })
}

/// Distribution of the number of clusters after allocating `m` nodes.
pub fn cluster_count_distribution(spec: &GibbsPriorSpec, m: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let spec = spec.resolved(m);
    // p[h] = P(H = h) after n nodes.
    let mut p = vec![0.0; m + 1];
    if m == 0 {
        p[0] = 1.0;
        return Ok(p);
    }
    p[1] = 1.0;
    for n in 1..m {
        let mut next = vec![0.0; m + 1];
        for h in 1..=n {
            if p[h] == 0.0 {
                continue;
            }
            let q = spec.new_cluster_probability(n, h)?;
            next[h] += p[h] * (1.0 - q);
            next[h + 1] += p[h] * q;
        }
        p = next;
    }
    Ok(p)
}

/// E[H] for `m` nodes, exact.
pub fn expected_clusters(spec: &GibbsPriorSpec, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one node".into()));
    }
    let p = cluster_count_distribution(spec, m)?;
    Ok(p.iter().enumerate().map(|(h, q)| h as f64 * q).sum())
}

/// Exact E[H] under the Dirichlet process: Σ α/(α+i−1).
pub fn dp_expected_clusters(alpha: f64, m: usize) -> f64 {
    (0..m).map(|i| alpha / (alpha + i as f64)).sum()
}

/// Monte Carlo estimate of E[H] with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterCountEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub simulations: usize,
}

/// E[H] by simulating the urn `simulations` times from `seed`.
pub fn expected_clusters_mc(
    spec: &GibbsPriorSpec,
    m: usize,
    simulations: usize,
    seed: u64,
) -> Result<ClusterCountEstimate> {
    spec.validate()?;
    if m == 0 || simulations < 2 {
        return Err(Error::InvalidParameter("need m ≥ 1 and at least two simulations".into()));
    }
    let mut rng = seeded(derive_seed(seed, &[0xCA11B]));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..simulations {
        let h = sample_partition(spec, m, &mut rng)?.n_clusters() as f64;
        sum += h;
        sum_sq += h * h;
    }
    let n = simulations as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(ClusterCountEstimate { mean, std_error: (var / n).sqrt(), simulations })
}

/// Outcome of [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub spec: GibbsPriorSpec,
    pub expected: f64,
    pub iterations: usize,
}

/// Tolerance the calibrated E[H] must reach.
pub const CALIBRATION_TOLERANCE: f64 = 0.1;
const CALIBRATION_ITERATIONS: usize = 60;

/// Finds the free concentration parameter giving E[H] = `target` for `m`
/// nodes, by bisection on the exact expectation.
pub fn calibrate(variant: PriorVariant, m: usize, target: f64) -> Result<Calibration> {
    if m == 0 || !(target >= 1.0 && target <= m as f64) {
        return Err(Error::InvalidParameter(format!(
            "target {target} must lie in [1, {m}]"
        )));
    }
    // Search coordinate x with the parameter a monotone function of x.
    let (lo, hi, to_param): (f64, f64, Box<dyn Fn(f64) -> f64>) = match variant {
        PriorVariant::Gnedin => (1e-9, 1.0 - 1e-9, Box::new(|x| x)),
        PriorVariant::DirichletProcess | PriorVariant::DirichletMultinomial { .. } => {
            (-20.0, 20.0, Box::new(|x: f64| x.exp()))
        }
        PriorVariant::PitmanYor { discount } => {
            if !(0.0..1.0).contains(&discount) {
                return Err(Error::InvalidParameter(format!("PY discount {discount} outside [0, 1)")));
            }
            (-20.0, 20.0, Box::new(move |x: f64| -discount + x.exp()))
        }
    };
    let eval = |x: f64| -> Result<f64> {
        let spec = variant.with_parameter(to_param(x));
        spec.validate()?;
        expected_clusters(&spec, m)
    };
    let (e_lo, e_hi) = (eval(lo)?, eval(hi)?);
    let (low, high) = (e_lo.min(e_hi), e_lo.max(e_hi));
    if m == 1 {
        let spec = variant.with_parameter(to_param(0.5 * (lo + hi)));
        return Ok(Calibration { spec, expected: 1.0, iterations: 0 });
    }
    if target < low - CALIBRATION_TOLERANCE || target > high + CALIBRATION_TOLERANCE {
        return Err(Error::CalibrationUnreachable { target, low, high });
    }
    let increasing = e_hi >= e_lo;
    let (mut a, mut b) = (lo, hi);
    let mut best = (f64::INFINITY, 0.5 * (lo + hi), 0.0);
    let mut iterations = 0;
    for _ in 0..CALIBRATION_ITERATIONS {
        iterations += 1;
        let mid = 0.5 * (a + b);
        let e = eval(mid)?;
        if (e - target).abs() < best.0 {
            best = ((e - target).abs(), mid, e);
        }
        if best.0 < 1e-10 {
            break;
        }
        if (e < target) == increasing {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (gap, x, expected) = best;
    if gap > CALIBRATION_TOLERANCE {
        return Err(Error::CalibrationUnreachable { target, low, high });
    }
    Ok(Calibration { spec: variant.with_parameter(to_param(x)), expected, iterations })
}

/// Every partition of `m` nodes in canonical form (Bell-number many).
pub fn enumerate_partitions(m: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; m];
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if i == labels.len() {
            out.push(Partition::new(labels.clone()).unwrap());
            return;
        }
        for l in 0..=max {
            labels[i] = l;
            rec(i + 1, max.max(l + 1), labels, out);
        }
    }
    if m == 0 {
        return out;
    }
    rec(1, 1, &mut labels, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn all_specs() -> Vec<GibbsPriorSpec> {
        vec![
            GibbsPriorSpec::Gnedin { gamma: 0.5 },
            GibbsPriorSpec::DirichletMultinomial { beta: 0.7, cap: Some(4) },
            GibbsPriorSpec::DirichletProcess { alpha: 1.3 },
            GibbsPriorSpec::PitmanYor { alpha: 0.8, discount: 0.25 },
        ]
    }

    #[test]
    fn first_allocation_opens_a_cluster() {
        for spec in all_specs() {
            assert_eq!(predictive_weights(&spec, &[], 0).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn gnedin_hand_example() {
        let spec = GibbsPriorSpec::Gnedin { gamma: 0.5 };
        let p = predictive_weights(&spec, &[2, 1], 3).unwrap();
        for (got, want) in p.iter().zip([3.0 / 7.0, 2.0 / 7.0, 2.0 / 7.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn dp_urn_example() {
        let spec = GibbsPriorSpec::DirichletProcess { alpha: 1.0 };
        let p = predictive_weights(&spec, &[2, 1], 3).unwrap();
        assert_eq!(p, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn dm_cap_closes_new_clusters() {
        let spec = GibbsPriorSpec::DirichletMultinomial { beta: 1.0, cap: Some(2) };
        let p = predictive_weights(&spec, &[1, 1], 2).unwrap();
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let spec = GibbsPriorSpec::DirichletProcess { alpha: 1.0 };
        assert!(predictive_weights(&spec, &[2, 1], 4).is_err());
    }

    #[test]
    fn weights_are_permutation_equivariant() {
        for spec in all_specs() {
            let a = predictive_weights(&spec, &[3, 1, 2], 6).unwrap();
            let b = predictive_weights(&spec, &[2, 3, 1], 6).unwrap();
            assert_eq!(a[0], b[1]);
            assert_eq!(a[1], b[2]);
            assert_eq!(a[2], b[0]);
            assert_eq!(a[3], b[3]);
        }
    }

    #[test]
    fn eppf_small_cases() {
        let dp = GibbsPriorSpec::DirichletProcess { alpha: 1.0 };
        assert!((log_eppf(&dp, &Partition::new(vec![0, 0]).unwrap()).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        for spec in all_specs() {
            assert_eq!(log_eppf(&spec, &Partition::new(vec![0]).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn eppf_sums_to_one_over_all_partitions() {
        for spec in all_specs() {
            let total: f64 = enumerate_partitions(5)
                .iter()
                .map(|p| log_eppf(&spec, p).unwrap().exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{}: {total}", spec.name());
        }
    }

    #[test]
    fn eppf_is_order_invariant() {
        let mut rng = seeded(3);
        let z = Partition::canonical(&[0, 1, 1, 2, 0, 3, 2, 1]);
        for spec in all_specs() {
            let base = log_eppf(&spec, &z).unwrap();
            let mut order: Vec<usize> = (0..8).collect();
            for _ in 0..100 {
                order.shuffle(&mut rng);
                let lp = log_eppf_in_order(&spec, &z, &order).unwrap();
                assert!((lp - base).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_contiguous_labels_are_rejected() {
        assert!(Partition::new(vec![0, 2]).is_err());
        assert_eq!(Partition::canonical(&[5, 2, 5]).labels(), &[0, 1, 0]);
    }

    #[test]
    fn exact_expectation_matches_harmonic_sum() {
        assert!((expected_clusters(&GibbsPriorSpec::DirichletProcess { alpha: 1.0 }, 3).unwrap() - 11.0 / 6.0).abs() < 1e-14);
        for spec in all_specs() {
            assert_eq!(expected_clusters(&spec, 1).unwrap(), 1.0);
        }
    }

    #[test]
    fn exact_expectation_agrees_with_enumeration() {
        for spec in all_specs() {
            let by_enum: f64 = enumerate_partitions(6)
                .iter()
                .map(|p| p.n_clusters() as f64 * log_eppf(&spec, p).unwrap().exp())
                .sum();
            let exact = expected_clusters(&spec, 6).unwrap();
            assert!((by_enum - exact).abs() < 1e-12, "{}", spec.name());
        }
    }

    #[test]
    fn monte_carlo_seeds_agree() {
        let spec = GibbsPriorSpec::Gnedin { gamma: 0.5 };
        let a = expected_clusters_mc(&spec, 30, DEFAULT_MC_SIMULATIONS, 1).unwrap();
        let b = expected_clusters_mc(&spec, 30, DEFAULT_MC_SIMULATIONS, 2).unwrap();
        let joint = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 3.0 * joint);
        let exact = expected_clusters(&spec, 30).unwrap();
        assert!((a.mean - exact).abs() < 4.0 * a.std_error);
    }

    #[test]
    fn dp_expectation_increases_with_alpha() {
        let mut last = 0.0;
        for alpha in [0.1, 0.3, 1.0, 3.0, 10.0] {
            let e = expected_clusters(&GibbsPriorSpec::DirichletProcess { alpha }, 20).unwrap();
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn dm_simulation_respects_cap() {
        let spec = GibbsPriorSpec::DirichletMultinomial { beta: 5.0, cap: Some(3) };
        let mut rng = seeded(5);
        for _ in 0..500 {
            assert!(sample_partition(&spec, 20, &mut rng).unwrap().n_clusters() <= 3);
        }
    }

    #[test]
    fn calibration_inverts_harmonic_sum() {
        let c = calibrate(PriorVariant::DirichletProcess, 3, 11.0 / 6.0).unwrap();
        match c.spec {
            GibbsPriorSpec::DirichletProcess { alpha } => assert!((alpha - 1.0).abs() < 1e-6),
            _ => unreachable!(),
        }
    }

    #[test]
    fn calibration_hits_target_for_every_variant() {
        for variant in [
            PriorVariant::Gnedin,
            PriorVariant::DirichletMultinomial { cap: None },
            PriorVariant::DirichletProcess,
            PriorVariant::PitmanYor { discount: 0.25 },
        ] {
            let c = calibrate(variant, 30, 4.5).unwrap();
            let e = expected_clusters(&c.spec, 30).unwrap();
            assert!((e - 4.5).abs() <= CALIBRATION_TOLERANCE, "{}: {e}", variant.name());
        }
    }

    #[test]
    fn single_node_calibration_accepts_anything() {
        let c = calibrate(PriorVariant::Gnedin, 1, 1.0).unwrap();
        assert_eq!(c.expected, 1.0);
        assert!(c.spec.validate().is_ok());
    }

    #[test]
    fn unreachable_target_reports_bracket() {
        let err = calibrate(PriorVariant::DirichletMultinomial { cap: Some(2) }, 30, 10.0).unwrap_err();
        assert!(matches!(err, Error::CalibrationUnreachable { .. }));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        for spec in all_specs() {
            #[derive(Serialize, Deserialize)]
            struct Wrap {
                prior: GibbsPriorSpec,
            }
            let text = toml::to_string(&Wrap { prior: spec.clone() }).unwrap();
            let back: Wrap = toml::from_str(&text).unwrap();
            assert_eq!(back.prior, spec);
        }
    }
}
