//! Spanning tree sampling in the broadcast congested clique.
//!
//! The pipeline computes marginal overestimates, associates every edge with
//! a light endpoint, blows edges up into exchangeable copies, and runs a
//! down-up walk whose communication is simulated round by round. Exact
//! rational oracles (tree counts, effective resistances, enumeration) back
//! every statistical check.

pub mod association;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod iso;
pub mod linalg;
pub mod oracle;
pub mod overest;
pub mod rational;
pub mod sim;
pub mod stats;
pub mod verify;
pub mod walk;
pub mod wilson;

pub use association::{light_associate_graph, verify_light_association, LightAssociation};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport};
pub use generate::{GraphSpec, WeightSpec};
pub use graph::{EdgeId, SpanningTree, VertexId, WeightedGraph};
pub use iso::{isotropic_transform, CopyMultiset, IsotropicGroundSet};
pub use oracle::{
    edge_marginal_exact, effective_resistance, enumerate_tree_distribution, tree_count,
    TreeDistribution,
};
pub use overest::{Backend, MarginalOverestimates};
pub use rational::Rational;
pub use sim::{RoundLedger, SimConfig, Simulator, Transcript};
pub use stats::{tv_distance, EmpiricalDistribution};
pub use walk::{prepare, run_walk, sample_spanning_tree, Prepared, WalkOutcome, WalkParams};
