//! Graph generators. Every generator returns a connected canonical graph.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

pub fn complete(n: usize) -> WeightedGraph {
    WeightedGraph::unit(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)))).unwrap()
}

pub fn path(n: usize) -> WeightedGraph {
    WeightedGraph::unit(n, (1..n).map(|b| (b - 1, b))).unwrap()
}

pub fn cycle(n: usize) -> WeightedGraph {
    WeightedGraph::unit(n, (0..n).map(|a| (a, (a + 1) % n))).unwrap()
}

/// Square 0-1-2-3 with a roof vertex 4 on top of the 2-3 side.
pub fn house() -> WeightedGraph {
    WeightedGraph::unit(5, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (3, 4)]).unwrap()
}

/// A clique on `round(sqrt(n))` vertices with an `n`-edge path hanging off
/// its last vertex.
pub fn path_plus_clique(n: usize) -> WeightedGraph {
    let s = ((n as f64).sqrt().round() as usize).max(1);
    let mut pairs: Vec<(usize, usize)> = (0..s)
        .flat_map(|a| (a + 1..s).map(move |b| (a, b)))
        .collect();
    pairs.extend((0..n).map(|i| (s - 1 + i, s + i)));
    WeightedGraph::unit(s + n, pairs).unwrap()
}

/// Connected random graph: a random recursive tree plus uniformly random
/// extra edges until `m` edges exist.
pub fn random_connected(n: usize, m: usize, seed: u64) -> Result<WeightedGraph> {
    let max_m = n * n.saturating_sub(1) / 2;
    if n == 0 || m + 1 < n || m > max_m {
        return Err(Error::InvalidSpec(format!(
            "random graph needs n >= 1 and n-1 <= m <= {max_m}, got n={n} m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut present = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        let (a, b) = (order[i], order[j]);
        present.insert((a.min(b), a.max(b)));
    }
    if m - present.len() > max_m / 2 {
        // dense: shuffle the complement instead of rejection sampling
        let mut rest: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|p| !present.contains(p))
            .collect();
        rest.shuffle(&mut rng);
        let need = m - present.len();
        present.extend(rest.into_iter().take(need));
    } else {
        while present.len() < m {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                present.insert((a.min(b), a.max(b)));
            }
        }
    }
    WeightedGraph::unit(n, present)
}

/// Generator description, written `kind:arg:arg`, e.g. `complete:8`,
/// `random:12:30:7`, `house`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphSpec {
    Complete(usize),
    Path(usize),
    Cycle(usize),
    PathPlusClique(usize),
    Random { n: usize, m: usize, seed: u64 },
    House,
}

impl GraphSpec {
    pub fn build(&self) -> Result<WeightedGraph> {
        match *self {
            GraphSpec::Complete(n) => Ok(complete(n)),
            GraphSpec::Path(n) => Ok(path(n)),
            GraphSpec::Cycle(n) => Ok(cycle(n)),
            GraphSpec::PathPlusClique(n) => Ok(path_plus_clique(n)),
            GraphSpec::Random { n, m, seed } => random_connected(n, m, seed),
            GraphSpec::House => Ok(house()),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::InvalidSpec(format!("bad generator spec `{s}`"));
        let num = |i: usize| -> Result<u64> {
            parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(bad)
        };
        let spec = match (parts[0], parts.len()) {
            ("complete", 2) => GraphSpec::Complete(num(1)? as usize),
            ("path", 2) => GraphSpec::Path(num(1)? as usize),
            ("cycle", 2) => GraphSpec::Cycle(num(1)? as usize),
            ("path-plus-clique", 2) => GraphSpec::PathPlusClique(num(1)? as usize),
            ("random", 4) => GraphSpec::Random {
                n: num(1)? as usize,
                m: num(2)? as usize,
                seed: num(3)?,
            },
            ("house", 1) => GraphSpec::House,
            _ => return Err(bad()),
        };
        let size_ok = match spec {
            GraphSpec::Complete(n) | GraphSpec::Path(n) => n >= 1,
            GraphSpec::Cycle(n) => n >= 3,
            GraphSpec::PathPlusClique(n) => n >= 1,
            GraphSpec::Random { n, .. } => n >= 1,
            GraphSpec::House => true,
        };
        if !size_ok {
            return Err(bad());
        }
        Ok(spec)
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Complete(n) => write!(f, "complete:{n}"),
            GraphSpec::Path(n) => write!(f, "path:{n}"),
            GraphSpec::Cycle(n) => write!(f, "cycle:{n}"),
            GraphSpec::PathPlusClique(n) => write!(f, "path-plus-clique:{n}"),
            GraphSpec::Random { n, m, seed } => write!(f, "random:{n}:{m}:{seed}"),
            GraphSpec::House => write!(f, "house"),
        }
    }
}

/// Edge weights applied on top of a generated graph, in canonical edge order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightSpec {
    Unit,
    List(Vec<u64>),
    /// Uniform integers in `1..=max`.
    Random { max: u64, seed: u64 },
}

impl WeightSpec {
    pub fn apply(&self, g: &WeightedGraph) -> Result<WeightedGraph> {
        match self {
            WeightSpec::Unit => Ok(g.clone()),
            WeightSpec::List(ws) => {
                if ws.len() != g.m() {
                    return Err(Error::InvalidSpec(format!(
                        "weight list has {} entries for {} edges",
                        ws.len(),
                        g.m()
                    )));
                }
                g.with_weights(ws)
            }
            WeightSpec::Random { max, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let ws: Vec<u64> = (0..g.m()).map(|_| rng.random_range(1..=*max)).collect();
                g.with_weights(&ws)
            }
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(format!("bad weight spec `{s}`"));
        let s = s.trim();
        if s == "unit" {
            return Ok(WeightSpec::Unit);
        }
        if let Some(rest) = s.strip_prefix("list:") {
            let ws: Option<Vec<u64>> = rest
                .split(',')
                .map(|x| x.trim().parse().ok().filter(|&w: &u64| w > 0))
                .collect();
            return ws.map(WeightSpec::List).ok_or_else(bad);
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let (max, seed) = rest.split_once(':').ok_or_else(bad)?;
            let max: u64 = max.parse().map_err(|_| bad())?;
            if max == 0 {
                return Err(bad());
            }
            return Ok(WeightSpec::Random {
                max,
                seed: seed.parse().map_err(|_| bad())?,
            });
        }
        Err(bad())
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Unit => write!(f, "unit"),
            WeightSpec::List(ws) => {
                let parts: Vec<String> = ws.iter().map(|w| w.to_string()).collect();
                write!(f, "list:{}", parts.join(","))
            }
            WeightSpec::Random { max, seed } => write!(f, "random:{max}:{seed}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::edge_marginal_exact;

    #[test]
    fn generator_sizes() {
        assert_eq!(complete(4).m(), 6);
        let p = path(5);
        assert_eq!(p.m(), 4);
        for e in 0..p.m() {
            assert_eq!(edge_marginal_exact(&p, e).unwrap(), crate::rational::int(1));
        }
        let ppc = path_plus_clique(16);
        assert_eq!(ppc.n(), 20);
        assert_eq!(ppc.m(), 16 + 6);
        assert!(ppc.is_connected());
        assert_eq!(house().m(), 6);
    }

    #[test]
    fn random_graphs_are_connected_with_requested_size() {
        for seed in 0..20 {
            for &(n, m) in &[(1, 0), (5, 4), (8, 20), (10, 45), (30, 60)] {
                let g = random_connected(n, m, seed).unwrap();
                assert_eq!(g.m(), m);
                assert!(g.is_connected());
            }
        }
        assert!(random_connected(5, 3, 0).is_err());
        assert!(random_connected(5, 11, 0).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("complete:4".parse::<GraphSpec>().unwrap(), GraphSpec::Complete(4));
        assert_eq!(
            "random:10:20:3".parse::<GraphSpec>().unwrap(),
            GraphSpec::Random { n: 10, m: 20, seed: 3 }
        );
        assert!("cycle:2".parse::<GraphSpec>().is_err());
        assert!("star:4".parse::<GraphSpec>().is_err());
        let s = GraphSpec::PathPlusClique(9);
        assert_eq!(s.to_string().parse::<GraphSpec>().unwrap(), s);
        assert_eq!(
            "list:1,1,2".parse::<WeightSpec>().unwrap(),
            WeightSpec::List(vec![1, 1, 2])
        );
        assert!("list:1,0".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn weight_list_must_match_edges() {
        let g = cycle(3);
        assert!(WeightSpec::List(vec![1, 2]).apply(&g).is_err());
        let w = WeightSpec::List(vec![1, 1, 2]).apply(&g).unwrap();
        assert_eq!(w.edge(2).w, 2);
    }
}
