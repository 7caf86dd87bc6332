//! Canonical undirected integer-weighted graphs and spanning trees.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub w: u64,
}

impl Edge {
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// An undirected graph in canonical form: `u < v` on every edge, no self
/// loops, one edge per vertex pair, edges sorted by `(u, v)`. The edge id is
/// the position in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    max_weight: u64,
    connected: bool,
}

impl WeightedGraph {
    /// Builds a canonical graph. Parallel edges are merged by summing their
    /// weights; self loops and zero weights are rejected.
    pub fn new(n: usize, raw: impl IntoIterator<Item = (VertexId, VertexId, u64)>) -> Result<Self> {
        let mut merged: BTreeMap<(VertexId, VertexId), u64> = BTreeMap::new();
        for (a, b, w) in raw {
            if a >= n || b >= n {
                return Err(Error::InvalidSpec(format!(
                    "edge ({a},{b}) out of range for {n} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidSpec(format!("self loop at vertex {a}")));
            }
            if w == 0 {
                return Err(Error::InvalidSpec(format!("edge ({a},{b}) has zero weight")));
            }
            let key = (a.min(b), a.max(b));
            let slot = merged.entry(key).or_insert(0);
            *slot = slot
                .checked_add(w)
                .ok_or_else(|| Error::InvalidSpec("merged weight overflows u64".into()))?;
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((u, v), w)| Edge { u, v, w })
            .collect();
        let max_weight = edges.iter().map(|e| e.w).max().unwrap_or(1);
        let mut g = WeightedGraph {
            n,
            edges,
            max_weight,
            connected: false,
        };
        g.connected = g.component_count() <= 1;
        Ok(g)
    }

    pub fn unit(n: usize, pairs: impl IntoIterator<Item = (VertexId, VertexId)>) -> Result<Self> {
        Self::new(n, pairs.into_iter().map(|(a, b)| (a, b, 1)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    /// The weight bound `U`.
    pub fn max_weight(&self) -> u64 {
        self.max_weight
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn find_edge(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by(|e| (e.u, e.v).cmp(&key))
            .ok()
    }

    /// Incident edge ids per vertex, ascending.
    pub fn incidence(&self) -> Vec<Vec<EdgeId>> {
        let mut inc = vec![Vec::new(); self.n];
        for (id, e) in self.edges.iter().enumerate() {
            inc[e.u].push(id);
            inc[e.v].push(id);
        }
        inc
    }

    /// Component label per vertex, labels assigned in order of smallest member.
    pub fn components(&self) -> Vec<usize> {
        let mut dsu = DisjointSets::new(self.n);
        for e in &self.edges {
            dsu.union(e.u, e.v);
        }
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut out = vec![0; self.n];
        for (x, slot) in out.iter_mut().enumerate() {
            let r = dsu.find(x);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            *slot = label[r];
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().max().map_or(0, |&c| c + 1)
    }

    /// Same vertex set, same edges, all weights replaced.
    pub fn with_weights(&self, weights: &[u64]) -> Result<Self> {
        assert_eq!(weights.len(), self.m());
        Self::new(
            self.n,
            self.edges.iter().zip(weights).map(|(e, &w)| (e.u, e.v, w)),
        )
    }

    /// Parses the edge-list format: one `u v w` per line, `#` comments.
    /// The vertex count is one past the largest id seen.
    pub fn parse_edge_list(reader: impl BufRead) -> Result<Self> {
        let mut raw = Vec::new();
        let mut n = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let parse_err = |msg: &str| Error::Parse {
                line: idx + 1,
                msg: msg.to_string(),
            };
            if fields.len() != 3 {
                return Err(parse_err("expected `u v w`"));
            }
            let u: usize = fields[0].parse().map_err(|_| parse_err("bad vertex id"))?;
            let v: usize = fields[1].parse().map_err(|_| parse_err("bad vertex id"))?;
            let w: u64 = fields[2].parse().map_err(|_| parse_err("bad weight"))?;
            if w == 0 {
                return Err(parse_err("weight must be positive"));
            }
            if u == v {
                return Err(parse_err("self loop"));
            }
            n = n.max(u + 1).max(v + 1);
            raw.push((u, v, w));
        }
        Self::new(n, raw)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n={} m={}\n", self.n, self.m());
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", e.u, e.v, e.w));
        }
        out
    }
}

/// A spanning tree as a sorted set of edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanningTree(Vec<EdgeId>);

impl SpanningTree {
    /// Wraps an edge set after checking it is acyclic and spans `g`.
    pub fn new(g: &WeightedGraph, mut edges: Vec<EdgeId>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        if !is_spanning_tree(g, &edges) {
            return Err(Error::InvalidSpec(format!(
                "edge set {edges:?} is not a spanning tree"
            )));
        }
        Ok(SpanningTree(edges))
    }

    pub(crate) fn from_sorted_unchecked(edges: Vec<EdgeId>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        SpanningTree(edges)
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.0
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn weight(&self, g: &WeightedGraph) -> num_bigint::BigUint {
        self.0
            .iter()
            .fold(num_bigint::BigUint::from(1u32), |acc, &e| acc * g.edge(e).w)
    }
}

impl fmt::Display for SpanningTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

pub fn is_spanning_tree(g: &WeightedGraph, edges: &[EdgeId]) -> bool {
    if g.n() == 0 {
        return edges.is_empty();
    }
    if edges.len() != g.n() - 1 {
        return false;
    }
    let mut dsu = DisjointSets::new(g.n());
    edges.iter().all(|&e| {
        let ed = g.edge(e);
        dsu.union(ed.u, ed.v)
    })
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_edges_merge_and_orient() {
        let g = WeightedGraph::new(3, [(1, 0, 2), (0, 1, 3), (2, 1, 1)]).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.edge(0), &Edge { u: 0, v: 1, w: 5 });
        assert_eq!(g.edge(1), &Edge { u: 1, v: 2, w: 1 });
        assert_eq!(g.max_weight(), 5);
        assert!(g.is_connected());
    }

    #[test]
    fn self_loop_and_zero_weight_rejected() {
        assert!(WeightedGraph::new(2, [(1, 1, 1)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 1, 0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 2, 1)]).is_err());
    }

    #[test]
    fn connectivity_flag_matches_reachability() {
        let g = WeightedGraph::unit(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
        assert_eq!(g.components(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn edge_list_round_trip_and_comments() {
        let text = "# triangle\n0 1 1\n\n1 2 2\n# c\n0 2 1\n";
        let g = WeightedGraph::parse_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.find_edge(2, 1), Some(2));
        let again = WeightedGraph::parse_edge_list(g.to_edge_list().as_bytes()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let err = WeightedGraph::parse_edge_list("0 1 1\n0 x 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = WeightedGraph::parse_edge_list("0 1 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn spanning_tree_checks() {
        let g = WeightedGraph::unit(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        assert!(SpanningTree::new(&g, vec![2, 0]).is_ok());
        assert!(SpanningTree::new(&g, vec![0]).is_err());
    }
}
