//! Config-driven pipeline runs and their JSON reports.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generate::{GraphSpec, WeightSpec};
use crate::graph::{EdgeId, SpanningTree, WeightedGraph};
use crate::oracle::{enumerate_tree_distribution, unweighted_tree_count};
use crate::overest::Backend;
use crate::rational::{parse, ratio, to_f64, Rational};
use crate::sim::{splitmix64, LedgerSummary, SimConfig, Simulator};
use crate::stats::{marginal_error_report, tv_distance, tv_error_bar, EmpiricalDistribution, MarginalRow};
use crate::walk::{prepare, run_walk, Prepared, WalkOutcome, WalkParams};

/// Graphs with more spanning trees than this are not enumerated for reports.
pub const REPORT_ENUMERATION_CAP: u64 = 100_000;
pub const TV_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum GraphSource {
    File(PathBuf),
    Generated(GraphSpec),
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::File(p) => write!(f, "file:{}", p.display()),
            GraphSource::Generated(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Exact,
    Sparsifier,
}

impl FromStr for BackendChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(BackendChoice::Exact),
            "sparsifier" => Ok(BackendChoice::Sparsifier),
            other => Err(Error::InvalidSpec(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    /// Replaces the graph's weights when set.
    pub weights: Option<WeightSpec>,
    pub backend: BackendChoice,
    /// Accuracy; also the sparsifier's `eps`.
    pub eps: Rational,
    pub gamma: Option<Rational>,
    pub steps: Option<u64>,
    pub t: Option<u64>,
    pub replicas: u64,
    pub seed: u64,
    pub bits: Option<usize>,
    pub out: Option<PathBuf>,
    pub trace: bool,
}

impl ExperimentConfig {
    pub fn new(graph: GraphSource) -> Self {
        ExperimentConfig {
            graph,
            weights: None,
            backend: BackendChoice::Exact,
            eps: ratio(1, 4),
            gamma: None,
            steps: None,
            t: None,
            replicas: 1,
            seed: 0,
            bits: None,
            out: None,
            trace: false,
        }
    }

    /// Parses flat `key=value` lines; `#` starts a comment. Keys mirror the
    /// command-line flags: `graph`, `gen`, `weights`, `backend`, `eps`,
    /// `gamma`, `steps`, `t`, `replicas`, `seed`, `bits`, `out`, `trace`.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg: Option<ExperimentConfig> = None;
        let mut rest = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: idx + 1,
                msg: "expected key=value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "graph" => cfg = Some(Self::new(GraphSource::File(value.into()))),
                "gen" => cfg = Some(Self::new(GraphSource::Generated(value.parse()?))),
                _ => rest.push((idx + 1, key.to_string(), value.to_string())),
            }
        }
        let mut cfg = cfg.ok_or_else(|| Error::InvalidSpec("config needs `graph` or `gen`".into()))?;
        for (line, key, value) in rest {
            cfg.set(&key, &value).map_err(|e| match e {
                Error::InvalidSpec(msg) => Error::Parse { line, msg },
                e => e,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidSpec(format!("bad value `{value}` for `{key}`"));
        let rational = || parse(value).ok_or_else(bad);
        let integer = || value.parse::<u64>().map_err(|_| bad());
        match key {
            "weights" => self.weights = Some(value.parse()?),
            "backend" => self.backend = value.parse()?,
            "eps" => self.eps = rational()?,
            "gamma" => self.gamma = Some(rational()?),
            "steps" => self.steps = Some(integer()?),
            "t" => self.t = Some(integer()?),
            "replicas" => self.replicas = integer()?,
            "seed" => self.seed = integer()?,
            "bits" => self.bits = Some(integer()? as usize),
            "out" => self.out = Some(value.into()),
            "trace" => self.trace = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::InvalidSpec(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidSpec("replicas must be at least 1".into()));
        }
        if self.eps <= ratio(0, 1) || self.eps >= ratio(1, 2) {
            return Err(Error::InvalidSpec(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        if self.gamma.as_ref().is_some_and(|g| *g < ratio(1, 1)) {
            return Err(Error::InvalidSpec("gamma must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_graph(&self) -> Result<WeightedGraph> {
        let g = match &self.graph {
            GraphSource::File(p) => WeightedGraph::parse_edge_list(BufReader::new(File::open(p)?))?,
            GraphSource::Generated(spec) => spec.build()?,
        };
        match &self.weights {
            Some(w) => w.apply(&g),
            None => Ok(g),
        }
    }

    pub fn backend(&self) -> Backend {
        match self.backend {
            BackendChoice::Exact => Backend::Exact,
            BackendChoice::Sparsifier => Backend::Sparsifier { eps: self.eps.clone() },
        }
    }

    pub fn walk_params(&self) -> WalkParams {
        WalkParams {
            gamma: self.gamma.clone(),
            steps: self.steps,
            t: self.t,
            eps: self.eps.clone(),
            ..WalkParams::default()
        }
    }

    pub fn sim_config(&self, g: &WeightedGraph, seed: u64) -> Result<SimConfig> {
        let cfg = SimConfig::for_graph(g, seed)?.with_transcript(self.trace);
        match self.bits {
            Some(b) => cfg.with_bits(b),
            None => Ok(cfg),
        }
    }
}

pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    splitmix64(seed ^ splitmix64(replica.wrapping_add(0x5eed)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamEcho {
    pub graph: String,
    pub n: usize,
    pub m: usize,
    pub max_weight: u64,
    pub backend: BackendChoice,
    pub eps: String,
    pub gamma: String,
    pub steps: u64,
    pub t: u64,
    pub p: String,
    pub ground_set_size: u64,
    pub overestimate_mass: String,
    pub association_iterations: u32,
    pub replicas: u64,
    pub seed: u64,
    pub bits_per_round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundStats {
    pub min: u64,
    pub max: u64,
    pub mean: f64,
    /// Rounds of the first replica minus the declared oracle charge.
    pub communication_first: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStats {
    pub samples: u64,
    pub support: usize,
    pub enumerable: bool,
    pub exact_support: Option<usize>,
    pub tv: Option<f64>,
    pub tv_exact: Option<String>,
    pub tv_error_bar: Option<f64>,
    pub max_load: u64,
    pub iterations: u64,
    pub resampled_iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub params: ParamEcho,
    pub ledger: LedgerSummary,
    pub rounds: RoundStats,
    pub empirical: EmpiricalStats,
    pub marginals: Vec<MarginalRow>,
    pub checks: Vec<CheckResult>,
    pub first_tree: Vec<EdgeId>,
    pub generated_at_unix: u64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with the timestamp removed; equal for equal configs.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("generated_at_unix");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub trees: Vec<SpanningTree>,
    /// Transcript of the first replica when tracing.
    pub transcript: Option<String>,
    /// Walk trace of the first replica when tracing.
    pub trace: Option<String>,
}

struct Replica {
    prep: Prepared,
    outcome: WalkOutcome,
    sim: Simulator,
}

fn run_replica(
    cfg: &ExperimentConfig,
    g: &WeightedGraph,
    shared: Option<&(Simulator, Prepared)>,
    replica: u64,
) -> Result<Replica> {
    let seed = replica_seed(cfg.seed, replica);
    let (mut sim, prep) = match shared {
        Some((base, prep)) => (base.fork(seed), prep.clone()),
        None => {
            let mut sim = Simulator::new(cfg.sim_config(g, seed)?);
            let prep = prepare(&mut sim, g, &cfg.backend(), &cfg.walk_params())?;
            (sim, prep)
        }
    };
    let outcome = run_walk(&mut sim, &prep)?;
    Ok(Replica { prep, outcome, sim })
}

/// Runs the pipeline `replicas` times and aggregates the results.
///
/// With the exact backend every stage before the walk is deterministic, so
/// it runs once and each replica forks the simulator afterwards.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let g = cfg.load_graph()?;
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let shared = match cfg.backend {
        BackendChoice::Exact => {
            let mut sim = Simulator::new(cfg.sim_config(&g, cfg.seed)?);
            let prep = prepare(&mut sim, &g, &Backend::Exact, &cfg.walk_params())?;
            Some((sim, prep))
        }
        BackendChoice::Sparsifier => None,
    };
    let replicas: Vec<Replica> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, &g, shared.as_ref(), r))
        .collect::<Result<_>>()?;

    let mut samples = EmpiricalDistribution::new();
    for r in &replicas {
        samples.record(r.outcome.tree.clone());
    }
    let first = &replicas[0];
    let rounds: Vec<u64> = replicas.iter().map(|r| r.sim.ledger().total_rounds()).collect();

    let mut checks = Vec::new();
    let spanning = replicas
        .iter()
        .all(|r| SpanningTree::new(&g, r.outcome.tree.edges().to_vec()).is_ok());
    checks.push(CheckResult::new("spanning", spanning, "every sample is a spanning tree"));
    let edge_total: u64 = samples.edge_counts(g.m()).iter().sum();
    let expect_total = samples.total() * (g.n() as u64 - 1);
    checks.push(CheckResult::new(
        "marginal_sum",
        edge_total == expect_total,
        format!("sum of edge counts {edge_total}, expected {expect_total}"),
    ));
    let recomputed = first.sim.ledger().recompute(first.sim.bits_per_round());
    checks.push(CheckResult::new(
        "rounds_reconcile",
        recomputed == first.sim.ledger().total_rounds(),
        format!(
            "ledger {} rounds, recomputed from bit counts {}",
            first.sim.ledger().total_rounds(),
            recomputed
        ),
    ));

    let enumerable = unweighted_tree_count(&g) <= BigInt::from(REPORT_ENUMERATION_CAP);
    let (tv, exact_support) = if enumerable {
        let exact = enumerate_tree_distribution(&g, REPORT_ENUMERATION_CAP)?;
        let tv = tv_distance(&samples.to_distribution(), exact.as_map())?;
        (Some(tv), Some(exact.len()))
    } else {
        (None, None)
    };
    let error_bar = exact_support.map(|s| tv_error_bar(s, samples.total()));
    if let (Some(tv), Some(bar)) = (&tv, error_bar) {
        let tvf = to_f64(tv);
        checks.push(CheckResult::new(
            "tv",
            tvf <= TV_TOLERANCE + bar,
            format!("tv {tvf:.5} vs tolerance {TV_TOLERANCE} + error bar {bar:.5}"),
        ));
    }

    let report = ExperimentReport {
        params: ParamEcho {
            graph: cfg.graph.to_string(),
            n: g.n(),
            m: g.m(),
            max_weight: g.max_weight(),
            backend: cfg.backend,
            eps: cfg.eps.to_string(),
            gamma: first.prep.iso.gamma.to_string(),
            steps: first.prep.steps,
            t: first.prep.t,
            p: first.prep.p.to_string(),
            ground_set_size: first.prep.iso.total,
            overestimate_mass: first.prep.iso.mass.to_string(),
            association_iterations: first.prep.association.iterations,
            replicas: cfg.replicas,
            seed: cfg.seed,
            bits_per_round: first.sim.bits_per_round(),
        },
        ledger: first.sim.ledger().summary(),
        rounds: RoundStats {
            min: rounds.iter().copied().min().unwrap_or(0),
            max: rounds.iter().copied().max().unwrap_or(0),
            mean: rounds.iter().sum::<u64>() as f64 / rounds.len() as f64,
            communication_first: first.sim.ledger().communication_rounds(),
        },
        empirical: EmpiricalStats {
            samples: samples.total(),
            support: samples.support(),
            enumerable,
            exact_support,
            tv: tv.as_ref().map(to_f64),
            tv_exact: tv.as_ref().map(ToString::to_string),
            tv_error_bar: error_bar,
            max_load: replicas.iter().map(|r| r.outcome.max_load()).max().unwrap_or(0),
            iterations: replicas.iter().map(|r| r.outcome.trace.len() as u64).sum(),
            resampled_iterations: replicas
                .iter()
                .map(|r| r.outcome.resampled_iterations() as u64)
                .sum(),
        },
        marginals: marginal_error_report(&g, &samples)?,
        checks,
        first_tree: first.outcome.tree.edges().to_vec(),
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let transcript = first.sim.transcript().map(|t| t.to_text());
    let trace = cfg.trace.then(|| first.outcome.trace_text());
    Ok(ExperimentOutput {
        report,
        trees: replicas.into_iter().map(|r| r.outcome.tree).collect(),
        transcript,
        trace,
    })
}
