//! Conditionals linking Ω to the latent network: spike-or-slab indicators,
//! slab variances, block assignments and block edge probabilities.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::model::Adjacency;
use crate::partition::{GibbsPriorSpec, Partition};
use crate::rng::{beta, categorical_from_log, inv_gamma};

/// π̲ᵢⱼ = Π[zᵢ, zⱼ] for every node pair.
pub fn edge_prob_matrix(z: &Partition, pi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let h = z.n_clusters();
    if pi.nrows() != h || pi.ncols() != h {
        return Err(Error::Dimension(format!(
            "{h} clusters but edge probabilities are {}x{}",
            pi.nrows(),
            pi.ncols()
        )));
    }
    let m = z.len();
    Ok(DMatrix::from_fn(m, m, |i, j| pi[(z.label(i), z.label(j))]))
}

/// Posterior probability that ω belongs to the slab N(0, τ²) rather than the
/// spike N(0, c·τ²), given prior inclusion probability `prior`.
pub fn inclusion_probability(omega: f64, tau2: f64, c: f64, prior: f64) -> f64 {
    if prior <= 0.0 {
        return 0.0;
    }
    if prior >= 1.0 {
        return 1.0;
    }
    let half_sq = 0.5 * omega * omega / tau2;
    let log_slab = -half_sq + prior.ln();
    let log_spike = -0.5 * c.ln() - half_sq / c + (1.0 - prior).ln();
    // 1 / (1 + exp(log_spike − log_slab)) computed without overflow.
    let x = log_spike - log_slab;
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Draws every δᵢⱼ from its Bernoulli conditional.
pub fn sample_adjacency<R: Rng + ?Sized>(
    omega: &DMatrix<f64>,
    slab_vars: &DMatrix<f64>,
    c: f64,
    prior_probs: &DMatrix<f64>,
    rng: &mut R,
) -> Adjacency {
    let m = omega.nrows();
    Adjacency::from_pairs(m, |i, j| {
        let p = inclusion_probability(omega[(i, j)], slab_vars[(i, j)], c, prior_probs[(i, j)]);
        rng.random::<f64>() < p
    })
}

/// Inverse-gamma shape and rate of τ² given ω and δ.
pub fn slab_posterior_params(omega: f64, included: bool, shape: f64, rate: f64, c: f64) -> (f64, f64) {
    let scale = if included { 1.0 } else { c };
    (shape + 0.5, rate + omega * omega / (2.0 * scale))
}

/// Redraws every off-diagonal τ²ᵢⱼ; the diagonal is left as is.
pub fn sample_slab_variances<R: Rng + ?Sized>(
    omega: &DMatrix<f64>,
    adjacency: &Adjacency,
    slab_vars: &mut DMatrix<f64>,
    shape: f64,
    rate: f64,
    c: f64,
    rng: &mut R,
) {
    let m = omega.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let (a, b) = slab_posterior_params(omega[(i, j)], adjacency.get(i, j), shape, rate, c);
            let v = inv_gamma(rng, a, b);
            slab_vars[(i, j)] = v;
            slab_vars[(j, i)] = v;
        }
    }
}

/// Edge and non-edge counts between (and within) blocks, over unordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCounts {
    pub edges: DMatrix<f64>,
    pub non_edges: DMatrix<f64>,
}

pub fn edge_counts(adjacency: &Adjacency, z: &Partition) -> EdgeCounts {
    let h = z.n_clusters();
    let mut edges = DMatrix::zeros(h, h);
    let mut non_edges = DMatrix::zeros(h, h);
    let m = z.len();
    for i in 0..m {
        for j in (i + 1)..m {
            let (a, b) = (z.label(i), z.label(j));
            let target = if adjacency.get(i, j) { &mut edges } else { &mut non_edges };
            target[(a, b)] += 1.0;
            if a != b {
                target[(b, a)] += 1.0;
            }
        }
    }
    EdgeCounts { edges, non_edges }
}

/// Draws π_{h,k} ~ Beta(a + m_{h,k}, b + m̄_{h,k}) for h ≤ k and mirrors.
pub fn sample_edge_probs<R: Rng + ?Sized>(
    adjacency: &Adjacency,
    z: &Partition,
    a: f64,
    b: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let counts = edge_counts(adjacency, z);
    let h = z.n_clusters();
    let mut pi = DMatrix::zeros(h, h);
    for r in 0..h {
        for s in r..h {
            let p = beta(rng, a + counts.edges[(r, s)], b + counts.non_edges[(r, s)]);
            pi[(r, s)] = p;
            pi[(s, r)] = p;
        }
    }
    pi
}

/// log p(Δ | z, Π) as a product of Bernoulli terms over block pairs.
pub fn adjacency_log_likelihood(adjacency: &Adjacency, z: &Partition, pi: &DMatrix<f64>) -> f64 {
    let counts = edge_counts(adjacency, z);
    let h = z.n_clusters();
    let term = |count: f64, p: f64| -> f64 {
        if count == 0.0 {
            0.0
        } else if p <= 0.0 {
            f64::NEG_INFINITY
        } else {
            count * p.ln()
        }
    };
    let mut ll = 0.0;
    for r in 0..h {
        for s in r..h {
            let p = pi[(r, s)];
            ll += term(counts.edges[(r, s)], p) + term(counts.non_edges[(r, s)], 1.0 - p);
        }
    }
    ll
}

/// Log weights for placing `node` into each existing block of `others`
/// (labels of all other nodes, contiguous over `0..h`; the entry for `node`
/// itself is ignored) and, last, into a new block.
pub fn esbm_node_log_weights(
    adjacency: &Adjacency,
    others: &[usize],
    n_clusters: usize,
    node: usize,
    spec: &GibbsPriorSpec,
    a: f64,
    b: f64,
) -> Result<Vec<f64>> {
    let m = others.len();
    let h = n_clusters;
    let mut sizes = vec![0usize; h];
    // Edges from `node` into each block and edge counts among the others.
    let mut r = vec![0.0; h];
    let mut m_edges = DMatrix::<f64>::zeros(h, h);
    for i in 0..m {
        if i == node {
            continue;
        }
        let li = others[i];
        sizes[li] += 1;
        if adjacency.get(node, i) {
            r[li] += 1.0;
        }
        for j in (i + 1)..m {
            if j == node || !adjacency.get(i, j) {
                continue;
            }
            let lj = others[j];
            m_edges[(li, lj)] += 1.0;
            if li != lj {
                m_edges[(lj, li)] += 1.0;
            }
        }
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidPartition("empty block among the other nodes".into()));
    }
    let pairs = |p: usize, q: usize| -> f64 {
        if p == q {
            (sizes[p] * (sizes[p] - 1) / 2) as f64
        } else {
            (sizes[p] * sizes[q]) as f64
        }
    };
    let allocated = m - 1;
    let mut out = Vec::with_capacity(h + 1);
    for target in 0..h {
        let mut lw = spec.existing_weight(sizes[target], allocated, h).ln();
        for k in 0..h {
            let edges = m_edges[(target, k)];
            let non_edges = pairs(target, k) - edges;
            let rk = r[k];
            let rbar = sizes[k] as f64 - rk;
            lw += ln_beta(a + edges + rk, b + non_edges + rbar) - ln_beta(a + edges, b + non_edges);
        }
        out.push(lw);
    }
    let mut lw = spec.new_weight(allocated, h)?.ln();
    for k in 0..h {
        lw += ln_beta(a + r[k], b + sizes[k] as f64 - r[k]) - ln_beta(a, b);
    }
    out.push(lw);
    Ok(out)
}

/// One collapsed sweep over all nodes, Π integrated out. Returns the updated
/// partition in first-appearance labelling.
pub fn esbm_update_assignments<R: Rng + ?Sized>(
    adjacency: &Adjacency,
    z: &Partition,
    spec: &GibbsPriorSpec,
    a: f64,
    b: f64,
    random_order: bool,
    rng: &mut R,
) -> Result<Partition> {
    let m = z.len();
    if adjacency.len() != m {
        return Err(Error::Dimension(format!("{m} labels for a {}-node network", adjacency.len())));
    }
    let spec = spec.resolved(m);
    let mut labels = z.labels().to_vec();
    let mut sizes = z.sizes();
    let mut order: Vec<usize> = (0..m).collect();
    if random_order {
        order.shuffle(rng);
    }
    for &node in &order {
        let old = labels[node];
        sizes[old] -= 1;
        if sizes[old] == 0 {
            // Drop the emptied block and close the gap in the labels.
            sizes.remove(old);
            for l in labels.iter_mut() {
                if *l > old {
                    *l -= 1;
                }
            }
        }
        let h = sizes.len();
        let lw = esbm_node_log_weights(adjacency, &labels, h, node, &spec, a, b)?;
        let pick = categorical_from_log(rng, &lw);
        if pick == h {
            sizes.push(1);
        } else {
            sizes[pick] += 1;
        }
        labels[node] = pick;
    }
    Ok(Partition::canonical(&labels))
}

/// Block-assignment update for callers that hold the full SBM state: the
/// collapsed z sweep followed by the Beta draw of Π.
pub fn sample_sbm<R: Rng + ?Sized>(
    adjacency: &Adjacency,
    z: &Partition,
    spec: &GibbsPriorSpec,
    a: f64,
    b: f64,
    random_order: bool,
    rng: &mut R,
) -> Result<(Partition, DMatrix<f64>)> {
    let z = esbm_update_assignments(adjacency, z, spec, a, b, random_order, rng)?;
    let pi = sample_edge_probs(adjacency, &z, a, b, rng);
    Ok((z, pi))
}

/// log p(Δ | z) with Π integrated out (Beta-Bernoulli per block pair).
pub fn collapsed_adjacency_log_likelihood(adjacency: &Adjacency, z: &Partition, a: f64, b: f64) -> f64 {
    let counts = edge_counts(adjacency, z);
    let h = z.n_clusters();
    let mut ll = 0.0;
    for r in 0..h {
        for s in r..h {
            let (e, n) = (counts.edges[(r, s)], counts.non_edges[(r, s)]);
            ll += ln_beta(a + e, b + n) - ln_beta(a, b);
        }
    }
    ll
}
