//! Shared workloads for the benchmarks.

use bcc_tree::error::Result;
use bcc_tree::generate::{complete, random_connected};
use bcc_tree::graph::WeightedGraph;
use bcc_tree::overest::Backend;
use bcc_tree::sim::{SimConfig, Simulator};
use bcc_tree::walk::{prepare, Prepared, WalkParams};

/// Graphs the benchmarks sweep over, labelled for report ids.
pub fn graphs() -> Vec<(String, WeightedGraph)> {
    let mut out = Vec::new();
    for n in [8, 16, 32] {
        out.push((format!("K{n}"), complete(n)));
    }
    for n in [16, 32] {
        let g = random_connected(n, 3 * n, n as u64).expect("generator");
        out.push((format!("random-{n}"), g));
    }
    out
}

pub fn simulator(g: &WeightedGraph, seed: u64) -> Result<Simulator> {
    Ok(Simulator::new(SimConfig::new(g.n(), g.max_weight(), seed)?))
}

/// Runs the preparation stages on `K_n` with the exact backend and returns
/// the simulator state right before the walk.
pub fn prepared_complete(n: usize, steps: u64) -> Result<(Simulator, Prepared)> {
    let g = complete(n);
    let mut sim = simulator(&g, 1)?;
    let params = WalkParams {
        steps: Some(steps),
        ..WalkParams::default()
    };
    let prep = prepare(&mut sim, &g, &Backend::Exact, &params)?;
    Ok((sim, prep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bcc_tree::walk::run_walk;

    #[test]
    fn workloads_build() {
        assert_eq!(graphs().len(), 5);
        let (sim, prep) = prepared_complete(6, 2).unwrap();
        let out = run_walk(&mut sim.fork(3), &prep).unwrap();
        assert_eq!(out.tree.edges().len(), 5);
    }
}
