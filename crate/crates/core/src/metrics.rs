//! Network summaries: degrees, modularity, variation of information and the
//! point partition.

use std::collections::HashMap;

use serde::Serialize;

use crate::dgp::posterior_median_adjacency;
use crate::draws::DrawStore;
use crate::error::{Error, Result};
use crate::model::Adjacency;
use crate::partition::Partition;

pub fn degrees(adjacency: &Adjacency) -> Vec<usize> {
    let m = adjacency.len();
    (0..m).map(|i| (0..m).filter(|&j| j != i && adjacency.get(i, j)).count()).collect()
}

pub fn average_degree(adjacency: &Adjacency) -> f64 {
    let d = degrees(adjacency);
    if d.is_empty() {
        return 0.0;
    }
    d.iter().sum::<usize>() as f64 / d.len() as f64
}

/// Normalisation of the degree-product term in the modularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModularityForm {
    /// dᵢdⱼ/N with N the number of edges.
    #[default]
    Literal,
    /// The conventional dᵢdⱼ/(2N), summed over all ordered pairs including i = j.
    Standard,
}

/// Literal form: Q = 1/(2N) Σ_{i≠j} (δᵢⱼ − dᵢdⱼ/N)·1(zᵢ = zⱼ) over ordered
/// pairs. Zero for an empty graph. The sum is accumulated over integers
/// scaled by the normaliser and divided once, so the result is the correctly
/// rounded value.
pub fn modularity_with(adjacency: &Adjacency, z: &Partition, form: ModularityForm) -> Result<f64> {
    let m = adjacency.len();
    if z.len() != m {
        return Err(Error::Dimension(format!("{} labels for {m} nodes", z.len())));
    }
    let n = adjacency.n_edges() as i128;
    if n == 0 {
        return Ok(0.0);
    }
    let (k, with_self) = match form {
        ModularityForm::Literal => (n, false),
        ModularityForm::Standard => (2 * n, true),
    };
    let d = degrees(adjacency);
    let mut num: i128 = 0;
    for i in 0..m {
        for j in 0..m {
            if (i != j || with_self) && z.label(i) == z.label(j) {
                num += k * i128::from(u8::from(adjacency.get(i, j))) - (d[i] * d[j]) as i128;
            }
        }
    }
    Ok(num as f64 / (2 * n * k) as f64)
}

pub fn modularity(adjacency: &Adjacency, z: &Partition) -> Result<f64> {
    modularity_with(adjacency, z, ModularityForm::Literal)
}

/// Variation of information in nats.
pub fn vi_distance(a: &Partition, b: &Partition) -> Result<f64> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::Dimension(format!("partitions of {m} and {} nodes", b.len())));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let (ha, hb) = (a.n_clusters(), b.n_clusters());
    let mut joint = vec![0usize; ha * hb];
    for i in 0..m {
        joint[a.label(i) * hb + b.label(i)] += 1;
    }
    // VI = Σ p_rs [ln(p_r/p_rs) + ln(p_s/p_rs)], exactly zero for equal partitions.
    let n = m as f64;
    let (sa, sb) = (a.sizes(), b.sizes());
    let mut vi = 0.0;
    for r in 0..ha {
        for s in 0..hb {
            let nrs = joint[r * hb + s];
            if nrs > 0 {
                let c = nrs as f64;
                vi += c / n * ((sa[r] as f64 / c).ln() + (sb[s] as f64 / c).ln());
            }
        }
    }
    Ok(vi)
}

/// Sampled partition minimising the average VI to all draws; ties go to
/// fewer clusters, then to the earliest occurrence.
pub fn point_partition(draws: &[Partition]) -> Result<Partition> {
    if draws.is_empty() {
        return Err(Error::InvalidParameter("no partitions to summarise".into()));
    }
    let mut unique: Vec<Partition> = Vec::new();
    let mut slot: Vec<usize> = Vec::with_capacity(draws.len());
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    for z in draws {
        let c = z.canonicalized();
        let k = *index.entry(c.labels().to_vec()).or_insert_with(|| {
            unique.push(c);
            unique.len() - 1
        });
        slot.push(k);
    }
    // Pairwise distances between distinct partitions; the loss then sums them
    // in draw order.
    let u = unique.len();
    let mut dist = vec![0.0; u * u];
    for a in 0..u {
        for b in 0..u {
            dist[a * u + b] = vi_distance(&unique[a], &unique[b])?;
        }
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (k, cand) in unique.iter().enumerate() {
        let loss = slot.iter().map(|&d| dist[k * u + d]).sum::<f64>() / draws.len() as f64;
        let better = match best {
            None => true,
            Some((bl, bh, _)) => loss < bl || (loss == bl && cand.n_clusters() < bh),
        };
        if better {
            best = Some((loss, cand.n_clusters(), k));
        }
    }
    Ok(unique[best.expect("non-empty").2].clone())
}

/// Network summary of a posterior sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub n_groups: usize,
    pub modularity: f64,
    pub average_degree: f64,
    pub partition: Vec<usize>,
    pub median_edges: usize,
}

pub fn summarize_network(store: &DrawStore, form: ModularityForm) -> Result<NetworkSummary> {
    let parts: Vec<Partition> = store.draws().iter().map(|d| d.partition.clone()).collect();
    let z = point_partition(&parts)?;
    let adj = posterior_median_adjacency(store);
    Ok(NetworkSummary {
        n_groups: z.n_clusters(),
        modularity: modularity_with(&adj, &z, form)?,
        average_degree: average_degree(&adj),
        partition: z.labels().to_vec(),
        median_edges: adj.n_edges(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::enumerate_partitions;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_partition<R: Rng>(m: usize, rng: &mut R) -> Partition {
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
        Partition::canonical(&labels)
    }

    #[test]
    fn degree_cases() {
        assert_eq!(degrees(&Adjacency::empty(4)), vec![0; 4]);
        let c = Adjacency::complete(4);
        assert_eq!(degrees(&c), vec![3; 4]);
        assert_eq!(average_degree(&c), 3.0);
    }

    #[test]
    fn modularity_hand_case() {
        let a = Adjacency::from_pairs(4, |i, j| (i, j) == (0, 1) || (i, j) == (2, 3));
        let z = Partition::new(vec![0, 0, 1, 1]).unwrap();
        assert_eq!(modularity(&a, &z).unwrap(), 0.5);
        assert_eq!(modularity(&a, &Partition::singletons(4)).unwrap(), 0.0);
        assert_eq!(modularity(&Adjacency::empty(4), &z).unwrap(), 0.0);
        assert_eq!(modularity_with(&a, &z, ModularityForm::Standard).unwrap(), 0.5);
    }

    #[test]
    fn vi_hand_cases() {
        let z = Partition::new(vec![0, 1, 1, 0]).unwrap();
        assert_eq!(vi_distance(&z, &z).unwrap(), 0.0);
        let one = Partition::single_cluster(4);
        let singles = Partition::singletons(4);
        assert!((vi_distance(&one, &singles).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn vi_is_a_metric() {
        let mut rng = seeded(1);
        for _ in 0..1000 {
            let a = random_partition(10, &mut rng);
            let b = random_partition(10, &mut rng);
            let c = random_partition(10, &mut rng);
            let (ab, bc, ac) = (vi_distance(&a, &b).unwrap(), vi_distance(&b, &c).unwrap(), vi_distance(&a, &c).unwrap());
            assert!(ac <= ab + bc + 1e-12);
            assert!((ab - vi_distance(&b, &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn vi_ignores_label_names() {
        let a = Partition::new(vec![0, 0, 1, 2]).unwrap();
        let relabelled = Partition::canonical(&[2, 2, 0, 1]);
        assert!(vi_distance(&a, &relabelled).unwrap().abs() < 1e-15);
    }

    #[test]
    fn point_partition_prefers_the_majority() {
        let p1 = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let p2 = Partition::single_cluster(4);
        let mut draws = vec![p1.clone(); 9];
        draws.push(p2);
        assert_eq!(point_partition(&draws).unwrap(), p1);
        assert_eq!(point_partition(&[p1.clone()]).unwrap().n_clusters(), 2);
        assert!(point_partition(&[]).is_err());
    }

    #[test]
    fn point_partition_matches_exhaustive_search_on_support() {
        let mut rng = seeded(2);
        let all = enumerate_partitions(5);
        for _ in 0..50 {
            let draws: Vec<Partition> = (0..12).map(|_| all[rng.random_range(0..all.len())].clone()).collect();
            let got = point_partition(&draws).unwrap();
            let loss = |c: &Partition| draws.iter().map(|d| vi_distance(c, d).unwrap()).sum::<f64>();
            let best = draws.iter().map(loss).fold(f64::INFINITY, f64::min);
            assert!((loss(&got) - best).abs() < 1e-9);
        }
    }
}
