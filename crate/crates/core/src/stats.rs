//! Distances between distributions and empirical marginal checks.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, SpanningTree, WeightedGraph};
use crate::oracle::all_edge_marginals;
use crate::rational::{to_f64, Rational};

const NORMALIZATION_SLACK: f64 = 1e-9;

/// `(1/2) sum |p - q|` over the union of supports; missing keys read as 0.
pub fn tv_distance<K: Ord>(
    p: &BTreeMap<K, Rational>,
    q: &BTreeMap<K, Rational>,
) -> Result<Rational> {
    for d in [p, q] {
        let total = to_f64(&d.values().sum::<Rational>());
        if (total - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::NotNormalized(total));
        }
    }
    let mut acc = Rational::zero();
    for (k, pv) in p {
        match q.get(k) {
            Some(qv) => acc += (pv - qv).abs(),
            None => acc += pv,
        }
    }
    for (k, qv) in q {
        if !p.contains_key(k) {
            acc += qv;
        }
    }
    Ok(acc / Rational::from_integer(2.into()))
}

/// Sample counts per spanning tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    counts: BTreeMap<SpanningTree, u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: SpanningTree) {
        *self.counts.entry(t).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &EmpiricalDistribution) {
        for (t, c) in &other.counts {
            *self.counts.entry(t.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &BTreeMap<SpanningTree, u64> {
        &self.counts
    }

    pub fn frequency(&self, t: &SpanningTree) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(t).copied().unwrap_or(0) as f64 / self.total as f64
    }

    /// Exact count fractions.
    pub fn to_distribution(&self) -> BTreeMap<SpanningTree, Rational> {
        self.counts
            .iter()
            .map(|(t, &c)| {
                (
                    t.clone(),
                    Rational::new(c.into(), self.total.into()),
                )
            })
            .collect()
    }

    /// Number of samples containing each edge.
    pub fn edge_counts(&self, m: usize) -> Vec<u64> {
        let mut out = vec![0; m];
        for (t, &c) in &self.counts {
            for &e in t.edges() {
                out[e] += c;
            }
        }
        out
    }
}

/// Monte-Carlo error bar `sqrt(|support| / N)` used alongside empirical TV.
pub fn tv_error_bar(support: usize, samples: u64) -> f64 {
    (support as f64 / samples.max(1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalRow {
    pub edge: EdgeId,
    pub u: usize,
    pub v: usize,
    pub empirical: f64,
    pub exact: f64,
    pub exact_rational: String,
    pub abs_error: f64,
}

pub fn marginal_error_report(
    g: &WeightedGraph,
    samples: &EmpiricalDistribution,
) -> Result<Vec<MarginalRow>> {
    if samples.total() == 0 {
        return Err(Error::InvalidSpec("marginal report needs at least one sample".into()));
    }
    let exact = all_edge_marginals(g);
    let counts = samples.edge_counts(g.m());
    Ok(g
        .edges()
        .iter()
        .enumerate()
        .map(|(id, e)| {
            let empirical = counts[id] as f64 / samples.total() as f64;
            let ex = to_f64(&exact[id]);
            MarginalRow {
                edge: id,
                u: e.u,
                v: e.v,
                empirical,
                exact: ex,
                exact_rational: exact[id].to_string(),
                abs_error: (empirical - ex).abs(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn dist(entries: &[(u32, Rational)]) -> BTreeMap<u32, Rational> {
        entries.iter().cloned().collect()
    }

    #[test]
    fn tv_examples() {
        let p = dist(&[(0, ratio(1, 2)), (1, ratio(1, 2))]);
        assert_eq!(tv_distance(&p, &p).unwrap(), int(0));
        let a = dist(&[(0, int(1))]);
        let b = dist(&[(1, int(1))]);
        assert_eq!(tv_distance(&a, &b).unwrap(), int(1));
        assert_eq!(tv_distance(&a, &p).unwrap(), ratio(1, 2));
    }

    #[test]
    fn tv_rejects_unnormalized() {
        let a = dist(&[(0, ratio(1, 2))]);
        let b = dist(&[(0, int(1))]);
        assert!(matches!(tv_distance(&a, &b), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn empirical_marginals_sum_to_tree_size() {
        use crate::generate::complete;
        use crate::wilson::sample_weighted_tree;
        use rand::SeedableRng;
        let g = complete(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut emp = EmpiricalDistribution::new();
        for _ in 0..200 {
            emp.record(sample_weighted_tree(&g, &mut rng).unwrap());
        }
        let total: u64 = emp.edge_counts(g.m()).iter().sum();
        assert_eq!(total, 200 * 4);
        let rows = marginal_error_report(&g, &emp).unwrap();
        let freq_sum: f64 = rows.iter().map(|r| r.empirical).sum();
        assert!((freq_sum - 4.0).abs() < 1e-9);
    }

    #[test]
    fn bridges_have_frequency_one() {
        use crate::generate::path;
        use crate::graph::SpanningTree;
        let g = path(4);
        let mut emp = EmpiricalDistribution::new();
        emp.record(SpanningTree::new(&g, vec![0, 1, 2]).unwrap());
        let rows = marginal_error_report(&g, &emp).unwrap();
        assert!(rows.iter().all(|r| r.empirical == 1.0 && r.abs_error == 0.0));
        assert!(marginal_error_report(&g, &EmpiricalDistribution::new()).is_err());
    }
}
