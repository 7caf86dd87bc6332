//! Command-line front end: sample trees, run experiments, dump oracle
//! values, and run the acceptance checks.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bcc_tree::error::Error;
use bcc_tree::experiment::{run_experiment, ExperimentConfig, GraphSource};
use bcc_tree::generate::{GraphSpec, WeightSpec};
use bcc_tree::graph::WeightedGraph;
use bcc_tree::oracle::{all_edge_marginals, enumerate_tree_distribution, tree_count};
use bcc_tree::verify::{run_criterion, CRITERIA};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "bcc-tree", version, about = "Random spanning trees in the broadcast congested clique")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one spanning tree.
    Sample(RunArgs),
    /// Run a config-driven experiment and write a JSON report.
    Experiment {
        /// Flat key=value config; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        replicas: Option<u64>,
    },
    /// Dump the exact tree count, edge marginals and (when small) the
    /// full tree distribution.
    Oracle {
        #[command(flatten)]
        graph: GraphArgs,
        /// Largest number of trees to enumerate.
        #[arg(long, default_value_t = 100_000)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance checks.
    Verify {
        /// Criteria to run, e.g. `--only 4,7`; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args, Clone, Default)]
struct GraphArgs {
    /// Edge-list file with one `u v w` per line.
    #[arg(long, conflicts_with = "gen")]
    graph: Option<PathBuf>,
    /// Generator: complete:N, path:N, cycle:N, path-plus-clique:N,
    /// random:N:M:SEED, house.
    #[arg(long)]
    gen: Option<String>,
    /// unit, list:W1,W2,..., or random:MAX:SEED.
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the per-iteration walk trace and the round transcript.
    #[arg(long)]
    trace: bool,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>().map(Error::root) {
            Some(
                Error::Parse { .. }
                | Error::InvalidSpec(_)
                | Error::Io(_)
                | Error::DisconnectedGraph
                | Error::TooManyTrees { .. },
            ) => EXIT_INPUT,
            Some(_) => EXIT_CHECK_FAILED,
            None => EXIT_INPUT,
        };
        Failure { code, err }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Error::from(err).into()
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        anyhow::Error::new(err).into()
    }
}

fn graph_source(args: &GraphArgs) -> Result<Option<GraphSource>, Failure> {
    Ok(match (&args.graph, &args.gen) {
        (Some(p), _) => Some(GraphSource::File(p.clone())),
        (None, Some(spec)) => Some(GraphSource::Generated(spec.parse::<GraphSpec>()?)),
        (None, None) => None,
    })
}

fn load_graph(args: &GraphArgs) -> Result<WeightedGraph, Failure> {
    let g = match graph_source(args)? {
        Some(GraphSource::File(p)) => {
            let f = fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?;
            WeightedGraph::parse_edge_list(BufReader::new(f))?
        }
        Some(GraphSource::Generated(spec)) => spec.build()?,
        None => return Err(Error::InvalidSpec("one of --graph or --gen is required".into()).into()),
    };
    match &args.weights {
        Some(w) => Ok(w.parse::<WeightSpec>()?.apply(&g)?),
        None => Ok(g),
    }
}

fn apply_flags(cfg: &mut ExperimentConfig, run: &RunArgs) -> Result<(), Failure> {
    let mut set = |key: &str, value: Option<String>| -> Result<(), Failure> {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
        Ok(())
    };
    set("weights", run.graph.weights.clone())?;
    set("backend", run.backend.clone())?;
    set("eps", run.eps.clone())?;
    set("gamma", run.gamma.clone())?;
    set("steps", run.steps.map(|x| x.to_string()))?;
    set("t", run.t.map(|x| x.to_string()))?;
    set("seed", run.seed.map(|x| x.to_string()))?;
    set("bits", run.bits.map(|x| x.to_string()))?;
    if let Some(out) = &run.out {
        cfg.out = Some(out.clone());
    }
    cfg.trace |= run.trace;
    Ok(())
}

fn config_from(run: &RunArgs, file: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_kv(&text)?
        }
        None => match graph_source(&run.graph)? {
            Some(src) => ExperimentConfig::new(src),
            None => {
                return Err(Error::InvalidSpec("one of --graph, --gen or --config is required".into()).into())
            }
        },
    };
    if file.is_some() {
        if let Some(src) = graph_source(&run.graph)? {
            cfg.graph = src;
        }
    }
    apply_flags(&mut cfg, run)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_traces(cfg: &ExperimentConfig, trace: Option<&str>, transcript: Option<&str>) -> Result<(), Failure> {
    match &cfg.out {
        Some(out) => {
            if let Some(t) = trace {
                fs::write(sibling(out, ".trace.txt"), t)?;
            }
            if let Some(t) = transcript {
                fs::write(sibling(out, ".transcript.txt"), t)?;
            }
        }
        None => {
            for t in [trace, transcript].into_iter().flatten() {
                eprint!("{t}");
            }
        }
    }
    Ok(())
}

fn sample(run: &RunArgs) -> Result<u8, Failure> {
    let cfg = config_from(run, None)?;
    let out = run_experiment(&cfg)?;
    let r = &out.report;
    println!(
        "tree={}",
        r.first_tree.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    );
    println!(
        "rounds={} oracle_charged={} communication={}",
        r.ledger.total_rounds, r.ledger.oracle_charged_rounds, r.ledger.communication_rounds
    );
    write_traces(&cfg, out.trace.as_deref(), out.transcript.as_deref())?;
    if let Some(path) = &cfg.out {
        fs::write(path, r.to_json())?;
    }
    Ok(if r.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn experiment(run: &RunArgs, file: Option<&Path>, replicas: Option<u64>) -> Result<u8, Failure> {
    let mut cfg = config_from(run, file)?;
    if let Some(r) = replicas {
        cfg.set("replicas", &r.to_string())?;
        cfg.validate()?;
    }
    let out = run_experiment(&cfg)?;
    write_or_print(cfg.out.as_deref(), &out.report.to_json())?;
    write_traces(&cfg, out.trace.as_deref(), out.transcript.as_deref())?;
    for c in &out.report.checks {
        eprintln!("{c}");
    }
    Ok(if out.report.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn oracle(args: &GraphArgs, cap: u64, out: Option<&Path>) -> Result<u8, Failure> {
    let g = load_graph(args)?;
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph.into());
    }
    let marginals = all_edge_marginals(&g);
    let edges: Vec<_> = g
        .edges()
        .iter()
        .zip(&marginals)
        .enumerate()
        .map(|(id, (e, q))| json!({"edge": id, "u": e.u, "v": e.v, "w": e.w, "marginal": q.to_string()}))
        .collect();
    let distribution = match enumerate_tree_distribution(&g, cap) {
        Ok(d) => json!(d
            .iter()
            .map(|(t, p)| json!({"tree": t.edges(), "probability": p.to_string()}))
            .collect::<Vec<_>>()),
        Err(Error::TooManyTrees { count, .. }) => json!({"skipped": format!("{count} trees exceed cap {cap}")}),
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "n": g.n(),
        "m": g.m(),
        "weighted_tree_count": tree_count(&g).to_string(),
        "edges": edges,
        "distribution": distribution,
    });
    write_or_print(out, &serde_json::to_string_pretty(&doc).expect("json"))?;
    Ok(0)
}

fn verify(only: &[u8]) -> Result<u8, Failure> {
    let mut failed = false;
    for (id, _) in CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.0)) {
        let report = run_criterion(*id)?;
        println!("{report}");
        for d in &report.details {
            println!("      {d}");
        }
        failed |= !report.pass;
    }
    Ok(if failed { EXIT_CHECK_FAILED } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample(run) => sample(run),
        Command::Experiment { config, run, replicas } => experiment(run, config.as_deref(), *replicas),
        Command::Oracle { graph, cap, out } => oracle(graph, *cap, out.as_deref()),
        Command::Verify { only } => verify(only),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bcc_tree::experiment::BackendChoice;

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("/tmp/r.json"), ".trace.txt"),
            PathBuf::from("/tmp/r.json.trace.txt")
        );
    }

    #[test]
    fn backend_flag_parses() {
        let mut cfg = ExperimentConfig::new(GraphSource::Generated(GraphSpec::Path(3)));
        let run = RunArgs {
            backend: Some("sparsifier".into()),
            steps: Some(3),
            ..RunArgs::default()
        };
        assert!(apply_flags(&mut cfg, &run).is_ok());
        assert_eq!(cfg.backend, BackendChoice::Sparsifier);
        assert_eq!(cfg.steps, Some(3));
    }
}
