//! Per-edge overestimates `q_e >= P[e in T]` of spanning-tree marginals.
//!
//! Two backends share one contract. The exact backend computes
//! `w_e R_eff(e)` directly and charges a declared polylog round cost. The
//! sparsifier backend samples edges by exact leverage score, orients the
//! sample with the light association routine, has every vertex broadcast
//! the sample edges it owns, and lets each machine solve the reconstructed
//! sparsifier locally; only the orientation and broadcast traffic is charged.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::association::light_associate;
use crate::error::{Error, Result};
use crate::graph::{DisjointSets, EdgeId, VertexId, WeightedGraph};
use crate::oracle::{all_edge_marginals, laplacian_of, LaplacianMatrix, ResistanceOracle};
use crate::rational::{ceil_log2, ceil_u64, int, round_up_dyadic, to_f64, Rational};
use crate::sim::{id_bits, BitString, BitReader, Simulator};

/// q values computed by the sparsifier backend are rounded up to multiples of `2^-32`.
pub const Q_DENOMINATOR_BITS: u32 = 32;
pub const MAX_SPARSIFIER_ATTEMPTS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendTag {
    Exact,
    Sparsifier,
}

impl BackendTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendTag::Exact => "exact",
            BackendTag::Sparsifier => "sparsifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Exact,
    Sparsifier { eps: Rational },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalOverestimates {
    pub q: Vec<Rational>,
    pub backend: BackendTag,
    /// `1 / (1 - eps)`, or 1 for the exact backend.
    pub slack: Rational,
}

impl MarginalOverestimates {
    /// `K = sum_e q_e`.
    pub fn mass(&self) -> Rational {
        self.q.iter().sum()
    }

    /// CSV `edge_id,u,v,q_num,q_den,backend`.
    pub fn to_csv(&self, g: &WeightedGraph) -> String {
        let mut out = String::from("edge_id,u,v,q_num,q_den,backend\n");
        for (id, (e, q)) in g.edges().iter().zip(&self.q).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                id,
                e.u,
                e.v,
                q.numer(),
                q.denom(),
                self.backend.as_str()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverestConfig {
    /// Rounds declared for the exact backend; default `ceil(log2 n)^5`.
    pub oracle_rounds: Option<u64>,
    /// Constant `c` in the sample budget `c n log2(n)^2 / eps^2`.
    pub sample_constant: Rational,
    pub alpha: Rational,
}

impl Default for OverestConfig {
    fn default() -> Self {
        OverestConfig {
            oracle_rounds: None,
            sample_constant: int(8),
            alpha: int(2),
        }
    }
}

pub fn default_oracle_rounds(n: usize) -> u64 {
    u64::from(ceil_log2(n as u64)).pow(5)
}

pub fn compute_overestimates_exact(
    sim: &mut Simulator,
    g: &WeightedGraph,
    cfg: &OverestConfig,
) -> Result<MarginalOverestimates> {
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let q = all_edge_marginals(g);
    let rounds = cfg.oracle_rounds.unwrap_or_else(|| default_oracle_rounds(g.n()));
    sim.charge_oracle("overest/oracle", rounds);
    Ok(MarginalOverestimates {
        q,
        backend: BackendTag::Exact,
        slack: Rational::one(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsifierEdge {
    pub edge: EdgeId,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub weight: Rational,
    pub owner: VertexId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientedSparsifier {
    pub edges: Vec<SparsifierEdge>,
    /// Out-degree budget `8 ceil(log2 n)^2 / eps^2`.
    pub out_degree_bound: u64,
    pub attempts: u32,
}

impl OrientedSparsifier {
    pub fn out_degrees(&self, n: usize) -> Vec<u64> {
        let mut d = vec![0; n];
        for e in &self.edges {
            d[e.owner] += 1;
        }
        d
    }

    pub fn max_out_degree(&self, n: usize) -> u64 {
        self.out_degrees(n).into_iter().max().unwrap_or(0)
    }

    /// Per-edge weights of the sparsifier on `g`'s edge ids (0 off the sample).
    pub fn weights(&self, m: usize) -> Vec<Rational> {
        let mut w = vec![Rational::zero(); m];
        for e in &self.edges {
            w[e.edge] = e.weight.clone();
        }
        w
    }

    pub fn laplacian(&self, g: &WeightedGraph) -> LaplacianMatrix {
        laplacian_of(g.n(), g, &self.weights(g.m()))
    }
}

pub fn out_degree_bound(n: usize, eps: &Rational) -> u64 {
    let l = u64::from(ceil_log2(n as u64));
    ceil_u64(&(int(8) * int((l * l) as i64) / (eps * eps)))
}

/// Sampling probability `min(1, m' * leverage / (n - 1))` with
/// `m' = ceil(c n log2(n)^2 / eps^2)`.
pub fn sampling_probabilities(
    g: &WeightedGraph,
    leverage: &[Rational],
    eps: &Rational,
    c: &Rational,
) -> Vec<Rational> {
    let n = g.n() as i64;
    let l2 = i64::from(ceil_log2(g.n() as u64)).max(1);
    let budget = ceil_u64(&(c * int(n) * int(l2 * l2) / (eps * eps)));
    leverage
        .iter()
        .map(|l| {
            let p = l * int(budget as i64) / int((n - 1).max(1));
            if p > Rational::one() {
                Rational::one()
            } else {
                p
            }
        })
        .collect()
}

fn push_biguint(p: &mut BitString, x: &BigUint) {
    let bits = x.bits();
    p.push(bits, 32);
    for i in (0..bits).rev() {
        p.push_bit(x.bit(i));
    }
}

fn read_biguint(r: &mut BitReader<'_>) -> BigUint {
    let bits = r.read(32);
    let mut x = BigUint::zero();
    for _ in 0..bits {
        x = (x << 1u32) + BigUint::from(r.read(1));
    }
    x
}

/// Encodes a non-negative rational as two length-prefixed integers.
pub fn encode_rational(p: &mut BitString, r: &Rational) {
    let num = r.numer().to_biguint().expect("non-negative rational");
    let den = r.denom().to_biguint().expect("positive denominator");
    push_biguint(p, &num);
    push_biguint(p, &den);
}

pub fn decode_rational(r: &mut BitReader<'_>) -> Rational {
    let num = read_biguint(r);
    let den = read_biguint(r);
    Rational::new(
        BigInt::from_biguint(Sign::Plus, num),
        BigInt::from_biguint(Sign::Plus, den),
    )
}

pub fn compute_overestimates_sparsifier(
    sim: &mut Simulator,
    g: &WeightedGraph,
    eps: &Rational,
    cfg: &OverestConfig,
) -> Result<(MarginalOverestimates, OrientedSparsifier)> {
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    if *eps <= Rational::zero() || *eps >= Rational::new(1.into(), 2.into()) {
        return Err(Error::InvalidSpec(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let n = g.n();
    let leverage = all_edge_marginals(g);
    let probs = sampling_probabilities(g, &leverage, eps, &cfg.sample_constant);

    let mut attempt = 0;
    let sample = loop {
        attempt += 1;
        if attempt > MAX_SPARSIFIER_ATTEMPTS {
            return Err(Error::SparsifierDegenerate {
                attempts: MAX_SPARSIFIER_ATTEMPTS,
            });
        }
        // the lower endpoint flips the coin for each edge
        let label = format!("overest/sample-{attempt}");
        let picks = sim.map_machines(|v| {
            let mut rng = sim.machine_rng(v, &label);
            g.edges()
                .iter()
                .enumerate()
                .filter(|(_, e)| e.u == v)
                .filter(|&(id, _)| probs[id].is_one() || rng.random::<f64>() < to_f64(&probs[id]))
                .map(|(id, _)| id)
                .collect::<Vec<_>>()
        });
        let mut sample: Vec<EdgeId> = picks.into_iter().flatten().collect();
        sample.sort_unstable();
        let mut dsu = DisjointSets::new(n);
        let joined = sample
            .iter()
            .filter(|&&e| dsu.union(g.edge(e).u, g.edge(e).v))
            .count();
        if joined == n - 1 {
            break sample;
        }
    };

    let pairs: Vec<_> = sample.iter().map(|&e| (g.edge(e).u, g.edge(e).v)).collect();
    let lev: Vec<_> = sample.iter().map(|&e| leverage[e].clone()).collect();
    let orient = light_associate(sim, &pairs, &lev, &cfg.alpha, true, "overest/orient")?;

    let weights: Vec<Rational> = sample
        .iter()
        .map(|&e| int(g.edge(e).w as i64) / &probs[e])
        .collect();
    let wid = id_bits(n);
    let outboxes = sim.map_machines(|v| {
        let mut payload = BitString::new();
        for (k, &e) in sample.iter().enumerate() {
            if orient.owner[k] == v {
                payload.push(g.edge(e).u as u64, wid);
                payload.push(g.edge(e).v as u64, wid);
                encode_rational(&mut payload, &weights[k]);
            }
        }
        sim.send_stream(v, &payload)
    });
    let inbox = sim.run_round("overest/sparsifier-broadcast", outboxes)?;

    // Every machine hears the same fragments; reassemble per sender and decode.
    let mut streams: BTreeMap<VertexId, BitString> = BTreeMap::new();
    for m in inbox.messages() {
        streams.entry(m.sender).or_default().extend(&m.payload);
    }
    let mut edges = Vec::with_capacity(sample.len());
    for (&sender, bits) in &streams {
        let mut r = bits.reader();
        while r.remaining() > 0 {
            let u = r.read(wid) as usize;
            let v = r.read(wid) as usize;
            let weight = decode_rational(&mut r);
            let edge = g.find_edge(u, v).expect("broadcast edge exists in G");
            edges.push(SparsifierEdge {
                edge,
                weight,
                owner: sender,
            });
        }
    }
    edges.sort_by_key(|e| e.edge);
    let sparsifier = OrientedSparsifier {
        edges,
        out_degree_bound: out_degree_bound(n, eps),
        attempts: attempt,
    };

    let all_pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    let oracle = ResistanceOracle::new(n, &all_pairs, &sparsifier.weights(g.m()));
    let inv = Rational::one() / (Rational::one() - eps);
    let q = g
        .edges()
        .iter()
        .map(|e| {
            let r = oracle
                .resistance(e.u, e.v)
                .expect("sparsifier spans the graph");
            round_up_dyadic(&(r * int(e.w as i64) * &inv), Q_DENOMINATOR_BITS)
        })
        .collect();
    Ok((
        MarginalOverestimates {
            q,
            backend: BackendTag::Sparsifier,
            slack: inv,
        },
        sparsifier,
    ))
}

/// Per-machine knowledge after the overestimate phase: machine `v` holds
/// `q_e` for each incident edge. No rounds are charged here; both backends
/// already paid for getting the values to the endpoints.
pub fn distribute_overestimates(
    g: &WeightedGraph,
    q: &MarginalOverestimates,
) -> Vec<BTreeMap<EdgeId, Rational>> {
    g.incidence()
        .into_iter()
        .map(|inc| inc.into_iter().map(|e| (e, q.q[e].clone())).collect())
        .collect()
}

/// Checks `(1 - eps) x^T L x <= x^T L~ x <= (1 + eps) x^T L x` on every
/// pair-difference vector; returns the violating pairs.
pub fn pair_sandwich_violations(
    g: &WeightedGraph,
    sparsifier: &OrientedSparsifier,
    eps: &Rational,
) -> Vec<(VertexId, VertexId)> {
    // x = 1_a - 1_b gives x^T L x = deg(a) + deg(b) + 2 w_ab in both matrices.
    let form = |w: &[Rational]| {
        let mut deg = vec![Rational::zero(); g.n()];
        let mut pair = BTreeMap::new();
        for (e, we) in g.edges().iter().zip(w) {
            deg[e.u] += we;
            deg[e.v] += we;
            pair.insert((e.u, e.v), we.clone());
        }
        (deg, pair)
    };
    let orig: Vec<Rational> = g.edges().iter().map(|e| int(e.w as i64)).collect();
    let (d, p) = form(&orig);
    let (dt, pt) = form(&sparsifier.weights(g.m()));
    let lo = Rational::one() - eps;
    let hi = Rational::one() + eps;
    let mut bad = Vec::new();
    for a in 0..g.n() {
        for b in a + 1..g.n() {
            let zero = Rational::zero();
            let x = &d[a] + &d[b] + p.get(&(a, b)).unwrap_or(&zero) * int(2);
            let y = &dt[a] + &dt[b] + pt.get(&(a, b)).unwrap_or(&zero) * int(2);
            if y < &lo * &x || y > &hi * &x {
                bad.push((a, b));
            }
        }
    }
    bad
}

/// Largest `sum_{e in E(S)} q_e - (|S| - 1) * slack` over all vertex subsets
/// (exhaustive; small graphs only). Non-positive means the density bound holds.
pub fn max_density_excess(g: &WeightedGraph, q: &[Rational], slack: &Rational) -> Rational {
    let n = g.n();
    assert!(n <= 20, "exhaustive subset scan");
    let mut worst: Option<Rational> = None;
    for mask in 1u32..(1 << n) {
        let size = i64::from(mask.count_ones());
        let mass: Rational = g
            .edges()
            .iter()
            .zip(q)
            .filter(|(e, _)| mask >> e.u & 1 == 1 && mask >> e.v & 1 == 1)
            .map(|(_, qe)| qe.clone())
            .sum();
        let excess = mass - int(size - 1) * slack;
        if worst.as_ref().is_none_or(|w| excess > *w) {
            worst = Some(excess);
        }
    }
    worst.unwrap_or_else(Rational::zero)
}

pub fn q_as_f64(q: &MarginalOverestimates) -> Vec<f64> {
    q.q.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}
