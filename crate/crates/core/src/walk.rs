//! The distributed down-up walk on the isotropic ground set.
//!
//! Each iteration every machine thins the copies of the edges it owns,
//! broadcasts `(u, v, count)` for each surviving edge, and the first machine
//! keeps a uniform `t`-subset of what it heard, adds the current tree, and
//! resamples a tree from the union. Only the first machine tracks the
//! current tree; the final tree is broadcast once at the end.

use std::fmt;

use num_traits::{One, ToPrimitive};
use rand::Rng;
use serde::Serialize;

use crate::association::{light_associate_graph, LightAssociation};
use crate::error::{Error, Result};
use crate::graph::{is_spanning_tree, DisjointSets, EdgeId, SpanningTree, WeightedGraph};
use crate::iso::{
    bernoulli_thin, down_step, hypergeometric_split, isotropic_transform, CopyMultiset,
    IsotropicGroundSet, ThinningPlan,
};
use crate::overest::{
    compute_overestimates_exact, compute_overestimates_sparsifier, decode_rational,
    encode_rational, Backend, MarginalOverestimates, OrientedSparsifier, OverestConfig,
};
use crate::rational::{ceil_log2, ceil_u64, int, Rational};
use crate::sim::{decode_tuple, encode_tuple, id_bits, BitString, BroadcastMessage, Simulator};
use crate::wilson::wilson_on;

pub const DEFAULT_RESAMPLE_LIMIT: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkParams {
    /// Copy scale; `n^3` when unset.
    pub gamma: Option<Rational>,
    /// Iterations; derived from `n`, `U` and `eps` when unset.
    pub steps: Option<u64>,
    /// Down-step size; `min(2n, |U|)` when unset.
    pub t: Option<u64>,
    pub eps: Rational,
    /// Multiplies the derived step count.
    pub step_scale: u64,
    pub resample_limit: u32,
    /// Start from the Borůvka max-weight tree. When off, the derived step
    /// count gets a burn-in factor.
    pub max_prob_init: bool,
    pub overest: OverestConfig,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            gamma: None,
            steps: None,
            t: None,
            eps: Rational::new(1.into(), 4.into()),
            step_scale: 1,
            resample_limit: DEFAULT_RESAMPLE_LIMIT,
            max_prob_init: true,
            overest: OverestConfig::default(),
        }
    }
}

pub fn default_gamma(n: usize) -> Rational {
    int((n as i64).pow(3))
}

/// `ceil(log2 n)^3 * ceil(log2(1/eps)) * ceil(log2(nU)) * scale`, times
/// `1 + ceil(log2(nU)) / ceil(log2 n)` without the max-weight start.
pub fn default_steps(n: usize, max_weight: u64, eps: &Rational, scale: u64, max_prob_init: bool) -> u64 {
    let l = u64::from(ceil_log2(n as u64).max(1));
    let acc = u64::from(ceil_log2(ceil_u64(&(Rational::one() / eps))).max(1));
    let nu = u64::from(ceil_log2((n as u64).saturating_mul(max_weight.max(1))).max(1));
    let base = l.pow(3) * acc * nu * scale.max(1);
    if max_prob_init {
        base
    } else {
        (base * (l + nu)).div_ceil(l)
    }
}

/// Everything fixed before the walk starts: overestimates, association,
/// copy counts, walk parameters and the initial tree.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: WeightedGraph,
    pub overestimates: MarginalOverestimates,
    pub sparsifier: Option<OrientedSparsifier>,
    pub association: LightAssociation,
    pub iso: IsotropicGroundSet,
    pub s0: SpanningTree,
    pub steps: u64,
    pub t: u64,
    /// Thinning probability `min(1, 2t / |U|)`.
    pub p: Rational,
    pub resample_limit: u32,
    p_f64: f64,
    plans: Vec<ThinningPlan>,
}

impl Prepared {
    pub fn p_f64(&self) -> f64 {
        self.p_f64
    }

    pub fn plans(&self) -> &[ThinningPlan] {
        &self.plans
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IterationTrace {
    pub iter: u64,
    pub sample_size: u64,
    pub resamples: u32,
    pub rounds: u64,
    /// Largest number of copies kept by one machine in this iteration.
    pub max_load: u64,
}

impl fmt::Display for IterationTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} |R|={} resamples={} rounds_this_iter={}",
            self.iter, self.sample_size, self.resamples, self.rounds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkOutcome {
    pub tree: SpanningTree,
    pub trace: Vec<IterationTrace>,
}

impl WalkOutcome {
    pub fn max_load(&self) -> u64 {
        self.trace.iter().map(|t| t.max_load).max().unwrap_or(0)
    }

    pub fn resampled_iterations(&self) -> usize {
        self.trace.iter().filter(|t| t.resamples > 0).count()
    }

    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|t| format!("{t}\n")).collect()
    }
}

/// Borůvka with one `(u, v, weight)` candidate per machine per phase.
/// Each component takes its heaviest outgoing edge, lower id first on ties.
pub fn initial_tree(sim: &mut Simulator, g: &WeightedGraph) -> Result<SpanningTree> {
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let n = g.n();
    let incidence = g.incidence();
    let better = |a: EdgeId, b: EdgeId| {
        let (wa, wb) = (g.edge(a).w, g.edge(b).w);
        wa > wb || (wa == wb && a < b)
    };
    let mut dsu = DisjointSets::new(n);
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    let mut phase = 0;
    while chosen.len() + 1 < n {
        phase += 1;
        let comp: Vec<usize> = (0..n).map(|v| dsu.find(v)).collect();
        let outboxes = sim.map_machines(|v| {
            let best = incidence[v]
                .iter()
                .copied()
                .filter(|&e| comp[g.edge(e).u] != comp[g.edge(e).v])
                .reduce(|a, b| if better(b, a) { b } else { a });
            best.map(|e| {
                let ed = g.edge(e);
                BroadcastMessage {
                    sender: v,
                    payload: encode_tuple(n, ed.u, ed.v, ed.w),
                }
            })
            .into_iter()
            .collect()
        });
        let inbox = sim.run_round(format!("init-tree/phase-{phase}"), outboxes)?;
        let mut best: Vec<Option<EdgeId>> = vec![None; n];
        for m in inbox.messages() {
            let (u, v, _) = decode_tuple(n, &m.payload);
            let e = g.find_edge(u, v).expect("candidate is an edge");
            for c in [comp[u], comp[v]] {
                if best[c].is_none_or(|b| better(e, b)) {
                    best[c] = Some(e);
                }
            }
        }
        let mut picks: Vec<EdgeId> = best.into_iter().flatten().collect();
        picks.sort_unstable();
        picks.dedup();
        if picks.is_empty() {
            return Err(Error::DisconnectedGraph);
        }
        for e in picks {
            if dsu.union(g.edge(e).u, g.edge(e).v) {
                chosen.push(e);
            }
        }
    }
    chosen.sort_unstable();
    Ok(SpanningTree::from_sorted_unchecked(chosen))
}

/// Adds one copy of each tree edge to `z`. The tree's copy of `e` already
/// lies among `z`'s `c_e` copies with probability `c_e / t_e`, so the count
/// grows by one with probability `(t_e - c_e) / t_e`.
pub fn union_with_tree<R: Rng + ?Sized>(
    z: &CopyMultiset,
    tree: &SpanningTree,
    copies: &[u64],
    rng: &mut R,
) -> CopyMultiset {
    let extra: Vec<(EdgeId, u64)> = tree
        .edges()
        .iter()
        .filter_map(|&e| {
            let c = z.count(e);
            (rng.random_range(0..copies[e]) >= c).then_some((e, 1))
        })
        .collect();
    z.union(&CopyMultiset::from_counts(extra))
}

/// Weights `w_e * c_e / t_e` on the support of `counts`, zero elsewhere.
///
/// Summing the isotropic distribution over which copies of each edge a
/// tree uses gives `P[T] ∝ mu(T) * prod_{e in T} c_e / t_e`, so the up-step
/// is a weighted tree sample with these weights.
pub fn modified_weights(g: &WeightedGraph, copies: &[u64], counts: &CopyMultiset) -> Vec<Rational> {
    let mut w = vec![int(0); g.m()];
    for &(e, c) in counts.entries() {
        w[e] = int(g.edge(e).w as i64) * int(c as i64) / int(copies[e] as i64);
    }
    w
}

/// Samples the next tree from the copy multiset `counts`, whose support
/// must span the graph.
pub fn up_step_counts<R: Rng + ?Sized>(
    g: &WeightedGraph,
    copies: &[u64],
    counts: &CopyMultiset,
    rng: &mut R,
) -> Result<SpanningTree> {
    let edges: Vec<_> = counts
        .entries()
        .iter()
        .map(|&(e, c)| {
            let ed = g.edge(e);
            (ed.u, ed.v, e, ed.w as f64 * c as f64 / copies[e] as f64)
        })
        .collect();
    wilson_on(g.n(), &edges, rng).map(SpanningTree::from_sorted_unchecked)
}

pub fn up_step<R: Rng + ?Sized>(
    g: &WeightedGraph,
    copies: &[u64],
    tree: &SpanningTree,
    z: &CopyMultiset,
    rng: &mut R,
) -> Result<SpanningTree> {
    let counts = union_with_tree(z, tree, copies, rng);
    up_step_counts(g, copies, &counts, rng)
}

fn compute_overestimates(
    sim: &mut Simulator,
    g: &WeightedGraph,
    backend: &Backend,
    cfg: &OverestConfig,
) -> Result<(MarginalOverestimates, Option<OrientedSparsifier>)> {
    match backend {
        Backend::Exact => compute_overestimates_exact(sim, g, cfg).map(|q| (q, None)),
        Backend::Sparsifier { eps } => {
            compute_overestimates_sparsifier(sim, g, eps, cfg).map(|(q, s)| (q, Some(s)))
        }
    }
}

/// Every machine announces its owned edge count and q-mass, then its owned
/// copy total; each machine rebuilds `m`, `K` and `|U|` from the broadcasts.
fn announce_ground_set(
    sim: &mut Simulator,
    q: &[Rational],
    owned: &[Vec<EdgeId>],
    iso: &IsotropicGroundSet,
) -> Result<()> {
    let outboxes = sim.map_machines(|v| {
        let mut p = BitString::new();
        p.push(owned[v].len() as u64, 32);
        let mass: Rational = owned[v].iter().map(|&e| q[e].clone()).sum();
        encode_rational(&mut p, &mass);
        sim.send_stream(v, &p)
    });
    let inbox = sim.run_round("iso/mass", outboxes)?;
    let (m, mass) = fold_streams(sim.n(), inbox.messages(), (0u64, int(0)), |acc, r| {
        let count = r.read(32);
        (acc.0 + count, acc.1 + decode_rational(r))
    });
    assert_eq!(m as usize, iso.m, "announced edge count");
    assert_eq!(mass, iso.mass, "announced mass");

    let outboxes = sim.map_machines(|v| {
        let mut p = BitString::new();
        p.push(owned[v].iter().map(|&e| iso.copies[e]).sum(), 64);
        sim.send_stream(v, &p)
    });
    let inbox = sim.run_round("iso/size", outboxes)?;
    let total = fold_streams(sim.n(), inbox.messages(), 0u64, |acc, r| acc + r.read(64));
    assert_eq!(total, iso.total, "announced ground set size");
    Ok(())
}

/// Reassembles each sender's fragments and folds `f` over the streams in
/// sender order.
fn fold_streams<T>(
    n: usize,
    messages: &[BroadcastMessage],
    init: T,
    mut f: impl FnMut(T, &mut crate::sim::BitReader<'_>) -> T,
) -> T {
    let mut streams = vec![BitString::new(); n];
    for m in messages {
        streams[m.sender].extend(&m.payload);
    }
    streams
        .iter()
        .filter(|s| !s.is_empty())
        .fold(init, |acc, s| f(acc, &mut s.reader()))
}

/// Runs every stage before the walk.
pub fn prepare(
    sim: &mut Simulator,
    g: &WeightedGraph,
    backend: &Backend,
    params: &WalkParams,
) -> Result<Prepared> {
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let n = g.n();
    let (overestimates, sparsifier) =
        compute_overestimates(sim, g, backend, &params.overest).map_err(|e| e.in_phase("overest"))?;
    let association = light_associate_graph(sim, g, &overestimates.q, &params.overest.alpha, true)
        .map_err(|e| e.in_phase("assoc"))?;
    let gamma = params.gamma.clone().unwrap_or_else(|| default_gamma(n));
    let iso = isotropic_transform(&overestimates.q, &gamma).map_err(|e| e.in_phase("iso"))?;
    let owned = association.owned(n);
    announce_ground_set(sim, &overestimates.q, &owned, &iso).map_err(|e| e.in_phase("iso"))?;

    let t = match params.t {
        Some(t) if t < n as u64 => {
            return Err(Error::InvalidSpec(format!("t = {t} must be at least n = {n}")));
        }
        Some(t) if t > iso.total => {
            return Err(Error::InvalidSpec(format!(
                "t = {t} exceeds the ground set size {}",
                iso.total
            )));
        }
        Some(t) => t,
        None => (2 * n as u64).min(iso.total),
    };
    let p = {
        let p = int(2 * t as i64) / int(iso.total as i64);
        if p > Rational::one() {
            Rational::one()
        } else {
            p
        }
    };
    let s0 = if params.max_prob_init {
        initial_tree(sim, g).map_err(|e| e.in_phase("init-tree"))?
    } else {
        // any spanning tree; the heaviest-first rule is the only one implemented
        let unit = g.with_weights(&vec![1; g.m()])?;
        initial_tree(sim, &unit).map_err(|e| e.in_phase("init-tree"))?
    };
    let steps = params.steps.unwrap_or_else(|| {
        default_steps(n, g.max_weight(), &params.eps, params.step_scale, params.max_prob_init)
    });
    let plans = owned.iter().map(|o| ThinningPlan::new(o, &iso.copies)).collect();
    Ok(Prepared {
        graph: g.clone(),
        overestimates,
        sparsifier,
        association,
        iso,
        s0,
        steps,
        t,
        p_f64: p.to_f64().unwrap_or(1.0),
        p,
        resample_limit: params.resample_limit,
        plans,
    })
}

/// Runs `steps` iterations from `start`.
pub fn run_walk_from(
    sim: &mut Simulator,
    prep: &Prepared,
    start: &SpanningTree,
    steps: u64,
) -> Result<WalkOutcome> {
    let g = &prep.graph;
    let n = g.n();
    let mut tree = start.clone();
    let mut trace = Vec::with_capacity(steps as usize);
    for i in 0..steps {
        let before = sim.ledger().total_rounds();
        let mut resamples = 0;
        let mut max_load = 0;
        let sample = loop {
            let label = format!("walk/iter-{i}/attempt-{resamples}");
            let kept = sim.map_machines(|v| {
                let mut rng = sim.machine_rng(v, &label);
                bernoulli_thin(&prep.plans[v], prep.p_f64, &mut rng)
            });
            max_load = kept.iter().map(CopyMultiset::total).fold(max_load, u64::max);
            let outboxes = kept
                .iter()
                .enumerate()
                .map(|(v, z)| {
                    z.entries()
                        .iter()
                        .map(|&(e, c)| {
                            let ed = g.edge(e);
                            BroadcastMessage {
                                sender: v,
                                payload: encode_tuple(n, ed.u, ed.v, c),
                            }
                        })
                        .collect()
                })
                .collect();
            let inbox = sim.run_round(format!("walk/iter-{i}/gather-{resamples}"), outboxes)?;
            let r = CopyMultiset::from_counts(inbox.messages().iter().map(|m| {
                let (u, v, c) = decode_tuple(n, &m.payload);
                (g.find_edge(u, v).expect("gathered tuple names an edge"), c)
            }));
            if r.total() >= prep.t {
                break r;
            }
            resamples += 1;
            if resamples >= prep.resample_limit {
                return Err(Error::ResampleLimitExceeded {
                    iteration: i,
                    attempts: resamples,
                }
                .in_phase("walk"));
            }
        };
        let mut rng = sim.machine_rng(0, &format!("walk/iter-{i}/down"));
        let z = down_step(&sample, prep.t, &mut rng).map_err(|e| e.in_phase("walk"))?;
        let mut rng = sim.machine_rng(0, &format!("walk/iter-{i}/up"));
        tree = up_step(g, &prep.iso.copies, &tree, &z, &mut rng).map_err(|e| e.in_phase("walk"))?;
        debug_assert!(is_spanning_tree(g, tree.edges()));
        trace.push(IterationTrace {
            iter: i,
            sample_size: sample.total(),
            resamples,
            rounds: sim.ledger().total_rounds() - before,
            max_load,
        });
    }
    if steps > 0 {
        tree = broadcast_tree(sim, g, &tree)?;
    }
    Ok(WalkOutcome { tree, trace })
}

/// The first machine broadcasts the tree as packed endpoint pairs.
fn broadcast_tree(sim: &mut Simulator, g: &WeightedGraph, tree: &SpanningTree) -> Result<SpanningTree> {
    let n = g.n();
    let w = id_bits(n);
    let outboxes = sim.map_machines(|v| {
        if v != 0 {
            return Vec::new();
        }
        let mut p = BitString::new();
        for &e in tree.edges() {
            p.push(g.edge(e).u as u64, w);
            p.push(g.edge(e).v as u64, w);
        }
        sim.send_stream(0, &p)
    });
    let inbox = sim.run_round("output/tree", outboxes)?;
    let edges = fold_streams(n, inbox.messages(), Vec::new(), |mut acc, r| {
        while r.remaining() >= 2 * w {
            let u = r.read(w) as usize;
            let v = r.read(w) as usize;
            acc.push(g.find_edge(u, v).expect("broadcast tree edge"));
        }
        acc
    });
    SpanningTree::new(g, edges)
}

pub fn run_walk(sim: &mut Simulator, prep: &Prepared) -> Result<WalkOutcome> {
    run_walk_from(sim, prep, &prep.s0, prep.steps)
}

/// Full pipeline: overestimates, association, transform, initial tree, walk.
pub fn sample_spanning_tree(
    sim: &mut Simulator,
    g: &WeightedGraph,
    backend: &Backend,
    params: &WalkParams,
) -> Result<(Prepared, WalkOutcome)> {
    let prep = prepare(sim, g, backend, params)?;
    let out = run_walk(sim, &prep)?;
    Ok((prep, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WalkConvention {
    /// Uniform size-`t` superset of the current tree, then resample.
    ExactSuperset,
    /// Uniform size-`t` subset of all copies, joined with the current tree.
    UnionWithSample,
}

/// Single-process walk drawing the down-step directly over all copies.
pub fn reference_walk_centralized<R: Rng + ?Sized>(
    g: &WeightedGraph,
    iso: &IsotropicGroundSet,
    start: &SpanningTree,
    steps: u64,
    t: u64,
    convention: WalkConvention,
    rng: &mut R,
) -> Result<SpanningTree> {
    let k = start.edges().len() as u64;
    if t > iso.total || (convention == WalkConvention::ExactSuperset && t < k) {
        return Err(Error::InvalidSpec(format!(
            "t = {t} incompatible with |U| = {} and k = {k}",
            iso.total
        )));
    }
    let mut tree = start.clone();
    for _ in 0..steps {
        let counts = match convention {
            WalkConvention::ExactSuperset => {
                let rest: Vec<u64> = (0..g.m())
                    .map(|e| iso.copies[e] - u64::from(tree.contains(e)))
                    .collect();
                let drawn = hypergeometric_split(&rest, t - k, rng);
                CopyMultiset::from_counts(
                    drawn
                        .into_iter()
                        .enumerate()
                        .map(|(e, c)| (e, c + u64::from(tree.contains(e)))),
                )
            }
            WalkConvention::UnionWithSample => {
                let drawn = hypergeometric_split(&iso.copies, t, rng);
                let z = CopyMultiset::from_counts(drawn.into_iter().enumerate());
                union_with_tree(&z, &tree, &iso.copies, rng)
            }
        };
        tree = up_step_counts(g, &iso.copies, &counts, rng)?;
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{complete, cycle, path};
    use crate::oracle::{enumerate_tree_distribution, enumerate_with_weights, DEFAULT_TREE_CAP};
    use crate::rational::ratio;
    use crate::sim::SimConfig;
    use crate::stats::{tv_distance, EmpiricalDistribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sim(g: &WeightedGraph, seed: u64) -> Simulator {
        Simulator::new(SimConfig::for_graph(g, seed).unwrap())
    }

    fn triangle_112() -> WeightedGraph {
        WeightedGraph::new(3, [(0, 1, 1), (0, 2, 1), (1, 2, 2)]).unwrap()
    }

    #[test]
    fn initial_tree_examples() {
        let p = path(6);
        assert_eq!(initial_tree(&mut sim(&p, 0), &p).unwrap().edges(), &[0, 1, 2, 3, 4]);

        let k4 = complete(4);
        let mut s = sim(&k4, 0);
        let t = initial_tree(&mut s, &k4).unwrap();
        assert!(is_spanning_tree(&k4, t.edges()));
        assert!(s.ledger().rounds_with_prefix("init-tree") <= 2);

        let g = triangle_112();
        let heavy = g.find_edge(1, 2).unwrap();
        assert!(initial_tree(&mut sim(&g, 0), &g).unwrap().contains(heavy));
    }

    #[test]
    fn initial_tree_phase_bound() {
        for n in [2, 5, 16, 33] {
            let g = complete(n);
            let mut s = sim(&g, 0);
            initial_tree(&mut s, &g).unwrap();
            let phases = s.ledger().records().len() as u32;
            assert!(phases <= ceil_log2(n as u64).max(1));
            assert!(s.ledger().records().iter().all(|r| r.rounds == 1));
        }
    }

    #[test]
    fn default_step_formula() {
        assert_eq!(default_steps(16, 1, &ratio(1, 4), 1, true), 64 * 2 * 4);
        assert_eq!(default_steps(16, 1, &ratio(1, 4), 1, false), 64 * 2 * 4 * 2);
        assert_eq!(default_steps(3, 1, &ratio(1, 4), 2, true), 8 * 2 * 2 * 2);
    }

    #[test]
    fn up_step_keeps_lone_tree() {
        let g = cycle(3);
        let copies = vec![3, 3, 3];
        let s = SpanningTree::new(&g, vec![0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let next = up_step(&g, &copies, &s, &CopyMultiset::new(), &mut rng).unwrap();
            assert_eq!(next, s);
        }
    }

    #[test]
    fn up_step_modified_weight_law() {
        let g = cycle(3);
        let copies = vec![3, 3, 3];
        let counts = CopyMultiset::from_counts([(0, 3), (1, 3), (2, 1)]);
        let exact =
            enumerate_with_weights(&g, &modified_weights(&g, &copies, &counts), DEFAULT_TREE_CAP)
                .unwrap();
        assert_eq!(
            exact.probability(&SpanningTree::new(&g, vec![0, 1]).unwrap()),
            ratio(9, 15)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut emp = EmpiricalDistribution::new();
        for _ in 0..100_000 {
            emp.record(up_step_counts(&g, &copies, &counts, &mut rng).unwrap());
        }
        let tv = tv_distance(&emp.to_distribution(), exact.as_map()).unwrap();
        assert!(tv <= ratio(1, 100), "tv {tv}");
    }

    #[test]
    fn zero_steps_returns_start() {
        let g = triangle_112();
        let mut s = sim(&g, 0);
        let params = WalkParams {
            gamma: Some(int(3)),
            steps: Some(0),
            ..WalkParams::default()
        };
        let (prep, out) = sample_spanning_tree(&mut s, &g, &Backend::Exact, &params).unwrap();
        assert_eq!(out.tree, prep.s0);
        assert!(out.trace.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = reference_walk_centralized(
            &g,
            &prep.iso,
            &prep.s0,
            0,
            prep.t,
            WalkConvention::ExactSuperset,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r, prep.s0);
    }

    #[test]
    fn tree_graph_is_fixed_point() {
        let g = path(5);
        let mut s = sim(&g, 3);
        let params = WalkParams {
            gamma: Some(int(1)),
            steps: Some(10),
            ..WalkParams::default()
        };
        let (prep, out) = sample_spanning_tree(&mut s, &g, &Backend::Exact, &params).unwrap();
        assert_eq!(prep.t, 4);
        assert_eq!(out.tree.edges(), &[0, 1, 2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for conv in [WalkConvention::ExactSuperset, WalkConvention::UnionWithSample] {
            let r = reference_walk_centralized(&g, &prep.iso, &prep.s0, 5, prep.t, conv, &mut rng)
                .unwrap();
            assert_eq!(r.edges(), &[0, 1, 2, 3]);
        }
    }

    #[test]
    fn prepared_parameters() {
        let g = cycle(3);
        let mut s = sim(&g, 0);
        let prep = prepare(&mut s, &g, &Backend::Exact, &WalkParams::default()).unwrap();
        // gamma = 27, q = 2/3, K = 2: t_e = ceil(27 * 3 * (2/3) / 2) = 27
        assert_eq!(prep.iso.copies, vec![27, 27, 27]);
        assert_eq!(prep.t, 6);
        assert_eq!(prep.p, ratio(12, 81));
        assert!(s.ledger().rounds_with_prefix("iso/mass") >= 1);
        assert_eq!(s.ledger().rounds_with_prefix("iso/size"), 1);
    }

    #[test]
    fn t_override_validated() {
        let g = cycle(3);
        let bad = |t| WalkParams {
            gamma: Some(int(3)),
            t: Some(t),
            ..WalkParams::default()
        };
        assert!(prepare(&mut sim(&g, 0), &g, &Backend::Exact, &bad(2)).is_err());
        assert!(prepare(&mut sim(&g, 0), &g, &Backend::Exact, &bad(10)).is_err());
        assert!(prepare(&mut sim(&g, 0), &g, &Backend::Exact, &bad(9)).is_ok());
    }

    #[test]
    fn trace_and_rounds_reconcile() {
        let g = complete(5);
        let mut s = sim(&g, 9);
        let params = WalkParams {
            steps: Some(20),
            ..WalkParams::default()
        };
        let prep = prepare(&mut s, &g, &Backend::Exact, &params).unwrap();
        let before = s.ledger().total_rounds();
        let out = run_walk(&mut s, &prep).unwrap();
        let walk_rounds: u64 = out.trace.iter().map(|t| t.rounds).sum();
        assert_eq!(walk_rounds, s.ledger().rounds_with_prefix("walk"));
        assert_eq!(
            s.ledger().total_rounds(),
            before + walk_rounds + s.ledger().rounds_with_prefix("output")
        );
        let line = out.trace[0].to_string();
        assert!(line.starts_with("iter=0 |R|="), "{line}");
        assert!(out.trace.iter().all(|t| t.sample_size >= prep.t));
    }

    #[test]
    fn walk_is_deterministic() {
        let g = complete(4);
        let params = WalkParams {
            steps: Some(15),
            ..WalkParams::default()
        };
        let run = || {
            let mut s = sim(&g, 77);
            let (_, out) = sample_spanning_tree(&mut s, &g, &Backend::Exact, &params).unwrap();
            (out, s.ledger().clone())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn triangle_walk_distribution() {
        let g = triangle_112();
        let params = WalkParams {
            gamma: Some(int(3)),
            steps: Some(10),
            ..WalkParams::default()
        };
        let mut base = sim(&g, 0);
        let prep = prepare(&mut base, &g, &Backend::Exact, &params).unwrap();
        let mut emp = EmpiricalDistribution::new();
        for r in 0..20_000 {
            let mut s = base.fork(r);
            emp.record(run_walk(&mut s, &prep).unwrap().tree);
        }
        let exact = enumerate_tree_distribution(&g, DEFAULT_TREE_CAP).unwrap();
        let tv = tv_distance(&emp.to_distribution(), exact.as_map()).unwrap();
        assert!(tv <= ratio(3, 100), "tv {tv}");
    }

    #[test]
    fn union_rule_counts() {
        let g = cycle(3);
        let tree = SpanningTree::new(&g, vec![0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // saturated edges never gain a copy
        let z = CopyMultiset::from_counts([(0, 3), (1, 3)]);
        let u = union_with_tree(&z, &tree, &[3, 3, 3], &mut rng);
        assert_eq!(u, z);
        // absent edges always gain one
        let u = union_with_tree(&CopyMultiset::new(), &tree, &[3, 3, 3], &mut rng);
        assert_eq!(u.entries(), &[(0, 1), (1, 1)]);
    }
}
