//! Weighted spanning tree sampling by loop-erased random walks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{DisjointSets, EdgeId, SpanningTree, VertexId, WeightedGraph};
use crate::rational::{to_f64, Rational};

struct Adjacency {
    // per vertex: (neighbor, edge id, cumulative weight)
    lists: Vec<Vec<(VertexId, EdgeId, f64)>>,
}

impl Adjacency {
    fn new(n: usize, edges: &[(VertexId, VertexId, EdgeId, f64)]) -> Self {
        let mut lists: Vec<Vec<(VertexId, EdgeId, f64)>> = vec![Vec::new(); n];
        for &(u, v, id, w) in edges {
            lists[u].push((v, id, w));
            lists[v].push((u, id, w));
        }
        for list in &mut lists {
            let mut acc = 0.0;
            for entry in list.iter_mut() {
                acc += entry.2;
                entry.2 = acc;
            }
        }
        Adjacency { lists }
    }

    fn step<R: Rng + ?Sized>(&self, x: VertexId, rng: &mut R) -> (VertexId, EdgeId) {
        let list = &self.lists[x];
        let total = list.last().expect("walk reached an isolated vertex").2;
        let r = rng.random::<f64>() * total;
        let i = list.partition_point(|&(_, _, c)| c <= r).min(list.len() - 1);
        (list[i].0, list[i].1)
    }
}

/// Samples a spanning tree of the `n`-vertex graph with the given weighted
/// edges `(u, v, id, weight)` with probability proportional to the product
/// of weights. Returns the sorted edge ids. Weights must be positive.
pub fn wilson_on<R: Rng + ?Sized>(
    n: usize,
    edges: &[(VertexId, VertexId, EdgeId, f64)],
    rng: &mut R,
) -> Result<Vec<EdgeId>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut dsu = DisjointSets::new(n);
    let mut joined = 1;
    for &(u, v, _, w) in edges {
        debug_assert!(w > 0.0);
        if dsu.union(u, v) {
            joined += 1;
        }
    }
    if joined != n {
        return Err(Error::DisconnectedGraph);
    }
    let adj = Adjacency::new(n, edges);
    let mut in_tree = vec![false; n];
    let mut next: Vec<(VertexId, EdgeId)> = vec![(usize::MAX, usize::MAX); n];
    let mut tree = Vec::with_capacity(n - 1);
    let root = rng.random_range(0..n);
    in_tree[root] = true;
    for start in 0..n {
        let mut x = start;
        while !in_tree[x] {
            next[x] = adj.step(x, rng);
            x = next[x].0;
        }
        let mut x = start;
        while !in_tree[x] {
            in_tree[x] = true;
            tree.push(next[x].1);
            x = next[x].0;
        }
    }
    tree.sort_unstable();
    Ok(tree)
}

/// Samples a spanning tree of `g` with probability proportional to the
/// product of `weights` (one per edge, positive). Exact up to the `f64`
/// rounding of the transition probabilities.
pub fn wilson_sample<R: Rng + ?Sized>(
    g: &WeightedGraph,
    weights: &[Rational],
    rng: &mut R,
) -> Result<SpanningTree> {
    assert_eq!(weights.len(), g.m());
    let edges: Vec<_> = g
        .edges()
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(id, (e, w))| (e.u, e.v, id, to_f64(w)))
        .collect();
    wilson_on(g.n(), &edges, rng).map(SpanningTree::from_sorted_unchecked)
}

/// Samples from `mu_w` with the graph's own integer weights.
pub fn sample_weighted_tree<R: Rng + ?Sized>(g: &WeightedGraph, rng: &mut R) -> Result<SpanningTree> {
    let edges: Vec<_> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(id, e)| (e.u, e.v, id, e.w as f64))
        .collect();
    wilson_on(g.n(), &edges, rng).map(SpanningTree::from_sorted_unchecked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{complete, path};
    use crate::oracle::{enumerate_tree_distribution, DEFAULT_TREE_CAP};
    use crate::rational::int;
    use crate::stats::{tv_distance, EmpiricalDistribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_input_returns_itself() {
        let g = path(6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t = sample_weighted_tree(&g, &mut rng).unwrap();
            assert_eq!(t.edges(), &[0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn disconnected_input_errors() {
        let g = WeightedGraph::unit(4, [(0, 1), (2, 3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_weighted_tree(&g, &mut rng),
            Err(Error::DisconnectedGraph)
        ));
    }

    fn frequencies_match(g: &WeightedGraph, trials: usize, tol: f64, seed: u64) {
        let exact = enumerate_tree_distribution(g, DEFAULT_TREE_CAP).unwrap();
        let weights: Vec<Rational> = g.edges().iter().map(|e| int(e.w as i64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut emp = EmpiricalDistribution::new();
        for _ in 0..trials {
            emp.record(wilson_sample(g, &weights, &mut rng).unwrap());
        }
        for (t, p) in exact.iter() {
            let f = emp.frequency(t);
            assert!((f - to_f64(p)).abs() <= tol, "tree {t}: {f} vs {p}");
        }
        let tv = to_f64(&tv_distance(&emp.to_distribution(), exact.as_map()).unwrap());
        let bound = 3.0 * (exact.len() as f64 / trials as f64).sqrt();
        assert!(tv <= bound, "tv {tv} > {bound}");
    }

    #[test]
    fn triangle_unit_frequencies() {
        let g = WeightedGraph::unit(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        frequencies_match(&g, 30_000, 0.02, 7);
    }

    #[test]
    fn triangle_weighted_frequencies() {
        let g = WeightedGraph::new(3, [(0, 1, 1), (0, 2, 1), (1, 2, 2)]).unwrap();
        frequencies_match(&g, 30_000, 0.02, 8);
    }

    #[test]
    fn k4_weighted_distribution() {
        let g = complete(4).with_weights(&[1, 2, 3, 1, 2, 5]).unwrap();
        frequencies_match(&g, 20_000, 0.02, 9);
    }
}
