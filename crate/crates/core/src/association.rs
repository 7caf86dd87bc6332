//! Light edge association: every edge is handed to one endpoint so that no
//! vertex collects more than `8 alpha` of q-weight per iteration.
//!
//! Each iteration costs one broadcast round: every machine announces its
//! residual degree. Both endpoints of a residual edge then evaluate both
//! claim conditions `q_e < 8 alpha / d` from the announced degrees, so the
//! outcome is agreed on without further messages. Ties go to the lower id.

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, VertexId, WeightedGraph};
use crate::rational::{bit_width, ceil_log2, int, Rational};
use crate::sim::{BitString, BroadcastMessage, Simulator};

/// Maximum number of times `alpha` may be doubled after a stalled iteration.
pub const MAX_ESCALATIONS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightAssociation {
    /// Owner endpoint per edge.
    pub owner: Vec<VertexId>,
    /// Iteration (1-based) in which each edge was assigned.
    pub iteration_assigned: Vec<u32>,
    pub iterations: u32,
    /// Residual edge count before each iteration.
    pub residual_history: Vec<usize>,
    #[serde(skip)]
    pub alpha: Rational,
    pub escalations: u32,
}

impl LightAssociation {
    /// Edges owned by each vertex.
    pub fn owned(&self, n: usize) -> Vec<Vec<EdgeId>> {
        let mut out = vec![Vec::new(); n];
        for (e, &v) in self.owner.iter().enumerate() {
            out[v].push(e);
        }
        out
    }

    pub fn assigned_weight(&self, n: usize, q: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); n];
        for (e, &v) in self.owner.iter().enumerate() {
            out[v] += &q[e];
        }
        out
    }

    /// CSV `edge_id,owner,q_num,q_den,iteration_assigned`.
    pub fn to_csv(&self, q: &[Rational]) -> String {
        let mut out = String::from("edge_id,owner,q_num,q_den,iteration_assigned\n");
        for (e, &v) in self.owner.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e,
                v,
                q[e].numer(),
                q[e].denom(),
                self.iteration_assigned[e]
            ));
        }
        out
    }
}

/// `ceil(log2 m) + 1`.
pub fn iteration_bound(m: usize) -> u32 {
    ceil_log2(m as u64) + 1
}

/// Runs the association on an arbitrary edge list over `sim`'s machines.
/// Rounds are charged under `"{phase}/iter-k"`.
pub fn light_associate(
    sim: &mut Simulator,
    pairs: &[(VertexId, VertexId)],
    q: &[Rational],
    alpha: &Rational,
    escalate: bool,
    phase: &str,
) -> Result<LightAssociation> {
    let n = sim.n();
    assert_eq!(pairs.len(), q.len());
    let mut incident: Vec<Vec<EdgeId>> = vec![Vec::new(); n];
    for (e, &(u, v)) in pairs.iter().enumerate() {
        incident[u].push(e);
        incident[v].push(e);
    }
    // machine-local residual views
    let mut residual: Vec<Vec<EdgeId>> = incident.clone();
    let mut owner = vec![usize::MAX; pairs.len()];
    let mut iteration_assigned = vec![0; pairs.len()];
    let mut remaining = pairs.len();
    let mut alpha = alpha.clone();
    let mut escalations = 0;
    let mut history = Vec::new();
    let mut iteration = 0u32;
    let width = bit_width(n as u64) as usize;

    while remaining > 0 {
        iteration += 1;
        history.push(remaining);
        let outboxes = sim.map_machines(|v| {
            let mut p = BitString::new();
            p.push(residual[v].len() as u64, width);
            vec![BroadcastMessage { sender: v, payload: p }]
        });
        let inbox = sim.run_round(format!("{phase}/iter-{iteration}"), outboxes)?;
        let degrees: Vec<u64> = {
            let mut d = vec![0; n];
            for m in inbox.messages() {
                d[m.sender] = m.payload.reader().read(width);
            }
            d
        };
        let bound = &alpha * int(8);
        let claims = |e: EdgeId, x: VertexId| -> bool {
            let d = degrees[x];
            d > 0 && &q[e] * Rational::from_integer(d.into()) < bound
        };
        // Each machine decides, for its incident residual edges, which it keeps
        // and which leave the residual graph.
        let decisions = sim.map_machines(|v| {
            let mut kept = Vec::new();
            let mut gone = Vec::new();
            for &e in &residual[v] {
                let (a, b) = pairs[e];
                let u = if a == v { b } else { a };
                let mine = claims(e, v);
                let theirs = claims(e, u);
                if mine && (!theirs || v < u) {
                    kept.push(e);
                }
                if mine || theirs {
                    gone.push(e);
                }
            }
            (kept, gone)
        });
        let mut assigned = 0;
        for (v, (kept, gone)) in decisions.into_iter().enumerate() {
            for e in kept {
                debug_assert_eq!(owner[e], usize::MAX, "edge {e} claimed twice");
                owner[e] = v;
                iteration_assigned[e] = iteration;
                assigned += 1;
            }
            residual[v].retain(|e| !gone.contains(e));
        }
        if assigned == 0 {
            if escalate && escalations < MAX_ESCALATIONS {
                alpha *= int(2);
                escalations += 1;
                continue;
            }
            return Err(Error::NoProgress { iteration });
        }
        remaining -= assigned;
    }
    Ok(LightAssociation {
        owner,
        iteration_assigned,
        iterations: iteration,
        residual_history: history,
        alpha,
        escalations,
    })
}

pub fn light_associate_graph(
    sim: &mut Simulator,
    g: &WeightedGraph,
    q: &[Rational],
    alpha: &Rational,
    escalate: bool,
) -> Result<LightAssociation> {
    let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    light_associate(sim, &pairs, q, alpha, escalate, "assoc")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationReport {
    pub pass: bool,
    pub partition_ok: bool,
    pub weight_ok: bool,
    pub iterations_ok: bool,
    pub max_weight: f64,
    pub weight_bound: f64,
    pub witnesses: Vec<String>,
}

/// Checks the partition property, the per-vertex bound
/// `8 alpha * iterations` and the iteration bound `ceil(log2 m) + 1`.
pub fn verify_association(
    n: usize,
    pairs: &[(VertexId, VertexId)],
    q: &[Rational],
    owner: &[Option<VertexId>],
    iterations: u32,
    alpha: &Rational,
) -> AssociationReport {
    let mut witnesses = Vec::new();
    let mut partition_ok = owner.len() == pairs.len();
    let mut load = vec![Rational::zero(); n];
    for (e, (&(u, v), o)) in pairs.iter().zip(owner).enumerate() {
        match o {
            None => {
                partition_ok = false;
                witnesses.push(format!("edge {e} has no owner"));
            }
            Some(x) if *x != u && *x != v => {
                partition_ok = false;
                witnesses.push(format!("edge {e} owned by non-endpoint {x}"));
            }
            Some(x) => load[*x] += &q[e],
        }
    }
    let bound = alpha * int(8) * int(i64::from(iterations.max(1)));
    let mut weight_ok = true;
    for (v, l) in load.iter().enumerate() {
        if *l > bound {
            weight_ok = false;
            witnesses.push(format!("vertex {v} carries {l} > {bound}"));
        }
    }
    let iterations_ok = iterations <= iteration_bound(pairs.len());
    if !iterations_ok {
        witnesses.push(format!(
            "{iterations} iterations exceed {}",
            iteration_bound(pairs.len())
        ));
    }
    let max_weight = load
        .iter()
        .max()
        .and_then(|x| x.to_f64())
        .unwrap_or(0.0);
    AssociationReport {
        pass: partition_ok && weight_ok && iterations_ok,
        partition_ok,
        weight_ok,
        iterations_ok,
        max_weight,
        weight_bound: bound.to_f64().unwrap_or(f64::INFINITY),
        witnesses,
    }
}

pub fn verify_light_association(
    g: &WeightedGraph,
    q: &[Rational],
    assoc: &LightAssociation,
    alpha: &Rational,
) -> AssociationReport {
    let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    let owner: Vec<_> = assoc.owner.iter().map(|&v| Some(v)).collect();
    verify_association(g.n(), &pairs, q, &owner, assoc.iterations, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{complete, random_connected};
    use crate::oracle::all_edge_marginals;
    use crate::rational::ratio;
    use crate::sim::SimConfig;

    fn sim_for(g: &WeightedGraph) -> Simulator {
        Simulator::new(SimConfig::for_graph(g, 0).unwrap())
    }

    #[test]
    fn single_edge() {
        let g = WeightedGraph::unit(2, [(0, 1)]).unwrap();
        let mut s = sim_for(&g);
        let a = light_associate_graph(&mut s, &g, &[int(1)], &int(2), false).unwrap();
        assert_eq!(a.owner, vec![0]);
        assert_eq!(a.iterations, 1);
    }

    #[test]
    fn star_goes_to_center() {
        let g = WeightedGraph::unit(9, (1..9).map(|i| (0, i))).unwrap();
        let q = vec![int(1); 8];
        let mut s = sim_for(&g);
        let a = light_associate_graph(&mut s, &g, &q, &int(2), false).unwrap();
        assert!(a.owner.iter().all(|&v| v == 0));
        assert_eq!(a.iterations, 1);
        assert_eq!(a.assigned_weight(9, &q)[0], int(8));
        assert!(verify_light_association(&g, &q, &a, &int(2)).pass);
    }

    #[test]
    fn triangle_lower_ids_win() {
        let g = complete(3);
        let q = vec![ratio(2, 3); 3];
        let mut s = sim_for(&g);
        let a = light_associate_graph(&mut s, &g, &q, &int(2), false).unwrap();
        assert_eq!(a.owner, vec![0, 0, 1]);
        assert_eq!(a.iterations, 1);
    }

    #[test]
    fn threshold_is_strict() {
        // q * d == 8 alpha exactly: nobody claims
        let g = WeightedGraph::unit(2, [(0, 1)]).unwrap();
        let mut s = sim_for(&g);
        let err = light_associate_graph(&mut s, &g, &[int(16)], &int(2), false).unwrap_err();
        assert!(matches!(err, Error::NoProgress { iteration: 1 }));
    }

    #[test]
    fn escalation_doubles_alpha() {
        let g = WeightedGraph::unit(2, [(0, 1)]).unwrap();
        let mut s = sim_for(&g);
        let a = light_associate_graph(&mut s, &g, &[int(16)], &int(2), true).unwrap();
        assert_eq!(a.escalations, 1);
        assert_eq!(a.alpha, int(4));
        assert_eq!(a.iterations, 2);
        // each stalled iteration still spends its announcement round
        assert_eq!(s.ledger().total_rounds(), 2);
    }

    #[test]
    fn verify_examples() {
        let g = complete(4);
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        let q = vec![ratio(1, 2); 6];
        // all of K4 to vertex 0 is impossible (not all incident), use endpoints-0 edges + others
        let owner: Vec<Option<usize>> = pairs.iter().map(|&(u, _)| Some(u)).collect();
        assert!(verify_association(4, &pairs, &q, &owner, 1, &int(2)).pass);
        let mut doctored = q.clone();
        doctored[0] = int(100);
        let r = verify_association(4, &pairs, &doctored, &owner, 1, &int(2));
        assert!(!r.weight_ok && !r.pass);
        let mut missing = owner.clone();
        missing[3] = None;
        let r = verify_association(4, &pairs, &q, &missing, 1, &int(2));
        assert!(!r.partition_ok);
        assert!(r.witnesses[0].contains("edge 3"));
    }

    #[test]
    fn one_announcement_per_machine_per_iteration() {
        let g = random_connected(20, 60, 4).unwrap();
        let q = all_edge_marginals(&g);
        let mut s = sim_for(&g);
        let a = light_associate_graph(&mut s, &g, &q, &int(2), false).unwrap();
        let recs = s.ledger().records();
        assert_eq!(recs.len() as u32, a.iterations);
        for r in recs {
            assert_eq!(r.rounds, 1);
            assert_eq!(r.senders.len(), 20);
            assert!(r.senders.iter().all(|s| s.2 == 1));
        }
    }

    #[test]
    fn residual_halves_under_density_premise() {
        for seed in 0..30 {
            let n = 5 + (seed as usize * 7) % 60;
            let max_m = n * (n - 1) / 2;
            let m = (n - 1 + (seed as usize * 13) % (max_m - n + 2)).min(max_m);
            let g = random_connected(n, m, seed).unwrap();
            let q = all_edge_marginals(&g);
            let mut s = sim_for(&g);
            let a = light_associate_graph(&mut s, &g, &q, &int(2), false).unwrap();
            let mut h = a.residual_history.clone();
            h.push(0);
            for w in h.windows(2) {
                assert!(2 * w[1] <= w[0], "residual {w:?} did not halve");
            }
            assert!(verify_light_association(&g, &q, &a, &int(2)).pass);
        }
    }
}
