//! Exact single-machine oracles: Laplacian, effective resistance, matrix-tree
//! counting and exhaustive spanning-tree enumeration.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::graph::{DisjointSets, EdgeId, SpanningTree, VertexId, WeightedGraph};
use crate::linalg::{self, IntMatrix};
use crate::rational::Rational;

pub const DEFAULT_TREE_CAP: u64 = 1_000_000;

/// Dense exact Laplacian `sum_e w_e (1_u - 1_v)(1_u - 1_v)^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    pub entries: Vec<Vec<Rational>>,
}

impl LaplacianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn quadratic_form(&self, x: &[Rational]) -> Rational {
        linalg::quadratic_form(&self.entries, x)
    }
}

pub fn build_laplacian(g: &WeightedGraph) -> LaplacianMatrix {
    let weights: Vec<Rational> = g
        .edges()
        .iter()
        .map(|e| Rational::from_integer(e.w.into()))
        .collect();
    laplacian_of(g.n(), g, &weights)
}

/// Laplacian of the edges of `g` under substitute weights (zero weights allowed).
pub fn laplacian_of(n: usize, g: &WeightedGraph, weights: &[Rational]) -> LaplacianMatrix {
    let mut l = vec![vec![Rational::zero(); n]; n];
    for (e, w) in g.edges().iter().zip(weights) {
        l[e.u][e.u] += w;
        l[e.v][e.v] += w;
        l[e.u][e.v] -= w;
        l[e.v][e.u] -= w;
    }
    LaplacianMatrix { entries: l }
}

/// Applies `L^+` to `b` by a grounded solve: one vertex per component is
/// deleted, the remaining system is solved, and the result is re-centred to
/// be orthogonal to each component's indicator. `b` must sum to zero on
/// every component.
pub fn pinv_apply(g: &WeightedGraph, b: &[Rational]) -> Result<Vec<Rational>> {
    let comps = g.components();
    let ncomp = comps.iter().max().map_or(0, |c| c + 1);
    let mut sums = vec![Rational::zero(); ncomp];
    for (x, bx) in b.iter().enumerate() {
        sums[comps[x]] += bx;
    }
    if sums.iter().any(|s| !s.is_zero()) {
        return Err(Error::InvalidSpec(
            "right-hand side is not orthogonal to the kernel".into(),
        ));
    }
    let (index, _) = grounding(g.n(), &comps);
    let lap = build_laplacian(g);
    let keep: Vec<VertexId> = (0..g.n()).filter(|&x| index[x].is_some()).collect();
    let a: Vec<Vec<Rational>> = keep
        .iter()
        .map(|&r| keep.iter().map(|&c| lap.entries[r][c].clone()).collect())
        .collect();
    let rhs: Vec<Rational> = keep.iter().map(|&r| b[r].clone()).collect();
    let sol = linalg::solve_rational(&a, &rhs).ok_or(Error::DisconnectedGraph)?;
    let mut x = vec![Rational::zero(); g.n()];
    for (k, &v) in keep.iter().enumerate() {
        x[v] = sol[k].clone();
    }
    let mut mean = vec![Rational::zero(); ncomp];
    let mut size = vec![0i64; ncomp];
    for v in 0..g.n() {
        mean[comps[v]] += &x[v];
        size[comps[v]] += 1;
    }
    for v in 0..g.n() {
        let c = comps[v];
        x[v] -= &mean[c] / Rational::from_integer(size[c].into());
    }
    Ok(x)
}

/// Grounded-matrix index per vertex: `None` for the first vertex of each component.
fn grounding(n: usize, comps: &[usize]) -> (Vec<Option<usize>>, usize) {
    let mut seen = vec![false; comps.iter().max().map_or(0, |c| c + 1)];
    let mut index = vec![None; n];
    let mut next = 0;
    for v in 0..n {
        if seen[comps[v]] {
            index[v] = Some(next);
            next += 1;
        } else {
            seen[comps[v]] = true;
        }
    }
    (index, next)
}

/// `(1_a - 1_b)^T L^+ (1_a - 1_b)` by one grounded solve.
pub fn resistance_between(g: &WeightedGraph, a: VertexId, b: VertexId) -> Result<Rational> {
    let comps = g.components();
    if comps[a] != comps[b] {
        return Err(Error::DisconnectedGraph);
    }
    if a == b {
        return Ok(Rational::zero());
    }
    let mut rhs = vec![Rational::zero(); g.n()];
    rhs[a] = Rational::one();
    rhs[b] = -Rational::one();
    let x = pinv_apply(g, &rhs)?;
    Ok(&x[a] - &x[b])
}

pub fn effective_resistance(g: &WeightedGraph, e: EdgeId) -> Result<Rational> {
    let ed = g.edge(e);
    resistance_between(g, ed.u, ed.v)
}

/// `P[e in T] = w_e R_eff(e)`.
pub fn edge_marginal_exact(g: &WeightedGraph, e: EdgeId) -> Result<Rational> {
    Ok(effective_resistance(g, e)? * Rational::from_integer(g.edge(e).w.into()))
}

/// Batched effective resistances from one fraction-free inversion of the
/// grounded Laplacian. Accepts rational edge weights (scaled to integers
/// internally); zero-weight edges are ignored.
#[derive(Debug, Clone)]
pub struct ResistanceOracle {
    comps: Vec<usize>,
    index: Vec<Option<usize>>,
    adj: IntMatrix,
    det: BigInt,
    /// Common denominator the weights were multiplied by.
    scale: BigInt,
}

impl ResistanceOracle {
    pub fn new(n: usize, pairs: &[(VertexId, VertexId)], weights: &[Rational]) -> Self {
        let scale = weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let mut dsu = DisjointSets::new(n);
        for ((u, v), w) in pairs.iter().zip(weights) {
            if !w.is_zero() {
                dsu.union(*u, *v);
            }
        }
        let mut label = BTreeMap::new();
        let comps: Vec<usize> = (0..n)
            .map(|x| {
                let r = dsu.find(x);
                let next = label.len();
                *label.entry(r).or_insert(next)
            })
            .collect();
        let (index, dim) = grounding(n, &comps);
        let mut lap = vec![vec![BigInt::zero(); dim]; dim];
        for ((u, v), w) in pairs.iter().zip(weights) {
            if w.is_zero() {
                continue;
            }
            let wi = (w * Rational::from_integer(scale.clone())).to_integer();
            if let Some(i) = index[*u] {
                lap[i][i] += &wi;
            }
            if let Some(j) = index[*v] {
                lap[j][j] += &wi;
            }
            if let (Some(i), Some(j)) = (index[*u], index[*v]) {
                lap[i][j] -= &wi;
                lap[j][i] -= &wi;
            }
        }
        let (adj, det) =
            linalg::adjugate_and_det(&lap).expect("grounded Laplacian is positive definite");
        ResistanceOracle {
            comps,
            index,
            adj,
            det,
            scale,
        }
    }

    pub fn for_graph(g: &WeightedGraph) -> Self {
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        let weights: Vec<_> = g
            .edges()
            .iter()
            .map(|e| Rational::from_integer(e.w.into()))
            .collect();
        Self::new(g.n(), &pairs, &weights)
    }

    pub fn resistance(&self, a: VertexId, b: VertexId) -> Result<Rational> {
        if self.comps[a] != self.comps[b] {
            return Err(Error::DisconnectedGraph);
        }
        let entry = |x: Option<usize>, y: Option<usize>| match (x, y) {
            (Some(i), Some(j)) => self.adj[i][j].clone(),
            _ => BigInt::zero(),
        };
        let (ia, ib) = (self.index[a], self.index[b]);
        let num = entry(ia, ia) + entry(ib, ib) - entry(ia, ib) * 2;
        Ok(Rational::new(num * &self.scale, self.det.clone()))
    }
}

/// All edge marginals `w_e R_eff(e)` of `g`.
pub fn all_edge_marginals(g: &WeightedGraph) -> Vec<Rational> {
    let oracle = ResistanceOracle::for_graph(g);
    g.edges()
        .iter()
        .map(|e| {
            oracle.resistance(e.u, e.v).expect("edge endpoints share a component")
                * Rational::from_integer(e.w.into())
        })
        .collect()
}

fn grounded_int_laplacian(g: &WeightedGraph, weights: impl Fn(usize) -> BigInt) -> IntMatrix {
    let n = g.n();
    let mut lap = vec![vec![BigInt::zero(); n]; n];
    for (id, e) in g.edges().iter().enumerate() {
        let w = weights(id);
        lap[e.u][e.u] += &w;
        lap[e.v][e.v] += &w;
        lap[e.u][e.v] -= &w;
        lap[e.v][e.u] -= &w;
    }
    lap.into_iter()
        .skip(1)
        .map(|row| row.into_iter().skip(1).collect())
        .collect()
}

/// Weighted spanning tree count `sum_T prod_{e in T} w_e` by the matrix-tree theorem.
pub fn tree_count(g: &WeightedGraph) -> Rational {
    if g.n() <= 1 {
        return Rational::one();
    }
    let lap = grounded_int_laplacian(g, |id| BigInt::from(g.edge(id).w));
    Rational::from_integer(linalg::determinant(lap))
}

/// Number of spanning trees, ignoring weights.
pub fn unweighted_tree_count(g: &WeightedGraph) -> BigInt {
    if g.n() <= 1 {
        return BigInt::one();
    }
    linalg::determinant(grounded_int_laplacian(g, |_| BigInt::one()))
}

/// Exact spanning tree distribution `mu_w` as a sorted map.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDistribution {
    probs: BTreeMap<SpanningTree, Rational>,
}

impl TreeDistribution {
    pub fn from_weights(weights: BTreeMap<SpanningTree, Rational>) -> Self {
        let total: Rational = weights.values().sum();
        let probs = weights
            .into_iter()
            .map(|(t, w)| (t, w / &total))
            .collect();
        TreeDistribution { probs }
    }

    pub fn probability(&self, t: &SpanningTree) -> Rational {
        self.probs.get(t).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpanningTree, &Rational)> {
        self.probs.iter()
    }

    pub fn marginal(&self, e: EdgeId) -> Rational {
        self.probs
            .iter()
            .filter(|(t, _)| t.contains(e))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn as_map(&self) -> &BTreeMap<SpanningTree, Rational> {
        &self.probs
    }
}

/// Enumerates every spanning tree with probability `prod w_e / tree_count`.
pub fn enumerate_tree_distribution(g: &WeightedGraph, cap: u64) -> Result<TreeDistribution> {
    let weights: Vec<Rational> = g
        .edges()
        .iter()
        .map(|e| Rational::from_integer(e.w.into()))
        .collect();
    enumerate_with_weights(g, &weights, cap)
}

/// Same as [`enumerate_tree_distribution`] but with substitute positive
/// weights; zero-weight edges are treated as absent.
pub fn enumerate_with_weights(
    g: &WeightedGraph,
    weights: &[Rational],
    cap: u64,
) -> Result<TreeDistribution> {
    let count = unweighted_tree_count(g);
    if count > BigInt::from(cap) {
        return Err(Error::TooManyTrees {
            count: count.to_string(),
            cap,
        });
    }
    let live: Vec<EdgeId> = (0..g.m()).filter(|&e| !weights[e].is_zero()).collect();
    let mut out = BTreeMap::new();
    if g.n() <= 1 {
        out.insert(SpanningTree::from_sorted_unchecked(Vec::new()), Rational::one());
        return Ok(TreeDistribution::from_weights(out));
    }
    let mut chosen = Vec::with_capacity(g.n() - 1);
    let labels: Vec<usize> = (0..g.n()).collect();
    contract_delete(g, &live, 0, labels, &mut chosen, &mut |tree| {
        let w: Rational = tree.iter().map(|&e| weights[e].clone()).product();
        out.insert(SpanningTree::from_sorted_unchecked(tree.to_vec()), w);
    });
    if out.is_empty() {
        return Err(Error::DisconnectedGraph);
    }
    Ok(TreeDistribution::from_weights(out))
}

/// Edge `live[i]` is either contracted into the partial tree or deleted;
/// deletion is explored only while the remaining edges can still connect
/// the contracted components.
fn contract_delete(
    g: &WeightedGraph,
    live: &[EdgeId],
    i: usize,
    labels: Vec<usize>,
    chosen: &mut Vec<EdgeId>,
    emit: &mut impl FnMut(&[EdgeId]),
) {
    if chosen.len() == g.n() - 1 {
        emit(chosen);
        return;
    }
    if i == live.len() {
        return;
    }
    let e = g.edge(live[i]);
    let (a, b) = (labels[e.u], labels[e.v]);
    if a != b {
        let merged: Vec<usize> = labels
            .iter()
            .map(|&l| if l == b { a } else { l })
            .collect();
        chosen.push(live[i]);
        contract_delete(g, live, i + 1, merged, chosen, emit);
        chosen.pop();
    }
    if still_connectable(g, live, i + 1, &labels) {
        contract_delete(g, live, i + 1, labels, chosen, emit);
    }
}

fn still_connectable(g: &WeightedGraph, live: &[EdgeId], from: usize, labels: &[usize]) -> bool {
    let mut dsu = DisjointSets::new(g.n());
    let mut comps = labels
        .iter()
        .enumerate()
        .filter(|&(v, &l)| v == l)
        .count();
    for &e in &live[from..] {
        let ed = g.edge(e);
        if dsu.union(labels[ed.u], labels[ed.v]) {
            comps -= 1;
        }
    }
    comps == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{complete, cycle, path};
    use crate::rational::{int, ratio};

    fn triangle(w: [u64; 3]) -> WeightedGraph {
        WeightedGraph::new(3, [(0, 1, w[0]), (0, 2, w[1]), (1, 2, w[2])]).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let g = WeightedGraph::unit(2, [(0, 1)]).unwrap();
        let l = build_laplacian(&g);
        assert_eq!(l.entries, vec![vec![int(1), int(-1)], vec![int(-1), int(1)]]);
        let l = build_laplacian(&triangle([1, 1, 1]));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.entries[i][j], if i == j { int(2) } else { int(-1) });
            }
        }
        let empty = WeightedGraph::unit(3, []).unwrap();
        assert!(build_laplacian(&empty)
            .entries
            .iter()
            .flatten()
            .all(|x| x.is_zero()));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let l = build_laplacian(&complete(5));
        for row in &l.entries {
            assert!(row.iter().sum::<Rational>().is_zero());
        }
    }

    #[test]
    fn resistance_examples() {
        let p = path(5);
        for e in 0..p.m() {
            assert_eq!(effective_resistance(&p, e).unwrap(), int(1));
        }
        assert_eq!(effective_resistance(&triangle([1, 1, 1]), 1).unwrap(), ratio(2, 3));
        for n in 3..8 {
            let c = cycle(n);
            assert_eq!(
                effective_resistance(&c, 0).unwrap(),
                ratio(n as i64 - 1, n as i64)
            );
        }
    }

    #[test]
    fn resistance_across_components_errors() {
        let g = WeightedGraph::unit(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            resistance_between(&g, 0, 3),
            Err(Error::DisconnectedGraph)
        ));
        assert_eq!(effective_resistance(&g, 1).unwrap(), int(1));
    }

    #[test]
    fn marginal_examples() {
        assert_eq!(edge_marginal_exact(&path(3), 0).unwrap(), int(1));
        assert_eq!(edge_marginal_exact(&triangle([1, 1, 1]), 0).unwrap(), ratio(2, 3));
        assert_eq!(edge_marginal_exact(&triangle([1, 1, 2]), 2).unwrap(), ratio(4, 5));
    }

    #[test]
    fn batched_oracle_matches_single_solves() {
        let g = WeightedGraph::new(
            5,
            [(0, 1, 3), (1, 2, 1), (2, 3, 2), (3, 4, 5), (0, 4, 1), (1, 3, 7), (0, 2, 2)],
        )
        .unwrap();
        let batched = all_edge_marginals(&g);
        for e in 0..g.m() {
            assert_eq!(batched[e], edge_marginal_exact(&g, e).unwrap());
        }
    }

    #[test]
    fn rational_weights_in_batched_oracle() {
        let g = triangle([1, 1, 1]);
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        let half = vec![ratio(1, 2); 3];
        let o = ResistanceOracle::new(3, &pairs, &half);
        // halving every conductance doubles every resistance
        assert_eq!(o.resistance(0, 1).unwrap(), ratio(4, 3));
    }

    #[test]
    fn tree_counts() {
        assert_eq!(tree_count(&complete(4)), int(16));
        assert_eq!(tree_count(&complete(5)), int(125));
        assert_eq!(tree_count(&triangle([1, 1, 2])), int(5));
        assert_eq!(tree_count(&WeightedGraph::unit(3, [(0, 1)]).unwrap()), int(0));
    }

    #[test]
    fn enumeration_examples() {
        let p = path(4);
        let d = enumerate_tree_distribution(&p, DEFAULT_TREE_CAP).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.iter().next().unwrap().1, &int(1));

        let d = enumerate_tree_distribution(&triangle([1, 1, 1]), DEFAULT_TREE_CAP).unwrap();
        assert!(d.iter().all(|(_, p)| *p == ratio(1, 3)));

        let g = triangle([1, 1, 2]);
        let d = enumerate_tree_distribution(&g, DEFAULT_TREE_CAP).unwrap();
        let t = |a, b| SpanningTree::new(&g, vec![a, b]).unwrap();
        assert_eq!(d.probability(&t(0, 1)), ratio(1, 5));
        assert_eq!(d.probability(&t(0, 2)), ratio(2, 5));
        assert_eq!(d.probability(&t(1, 2)), ratio(2, 5));
    }

    #[test]
    fn enumeration_cap_is_checked_first() {
        let err = enumerate_tree_distribution(&complete(6), 100).unwrap_err();
        assert!(matches!(err, Error::TooManyTrees { .. }));
    }

    #[test]
    fn pinv_recentres() {
        let g = triangle([1, 2, 3]);
        let b = vec![int(1), int(-1), int(0)];
        let x = pinv_apply(&g, &b).unwrap();
        assert!(x.iter().sum::<Rational>().is_zero());
        // L x = b
        let l = build_laplacian(&g);
        for i in 0..3 {
            let lx: Rational = (0..3).map(|j| &l.entries[i][j] * &x[j]).sum();
            assert_eq!(lx, b[i]);
        }
    }
}
