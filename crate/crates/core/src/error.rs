use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("vertices {0} and {1} lie in different components")]
    DifferentComponents(usize, usize),
    #[error("graph has {count} spanning trees, above the enumeration cap {cap}")]
    TooManyTrees { count: String, cap: u64 },
    #[error("payload of {bits} bits exceeds the per-round budget of {budget} bits")]
    PayloadTooLarge { bits: usize, budget: usize },
    #[error("sparsifier sample was disconnected after {attempts} attempts")]
    SparsifierDegenerate { attempts: u32 },
    #[error("light association made no progress in iteration {iteration}")]
    NoProgress { iteration: u32 },
    #[error("sampled multiset has {have} copies, need {need}")]
    InsufficientSample { have: u64, need: u64 },
    #[error("iteration {iteration}: |R| < t after {attempts} consecutive resamples")]
    ResampleLimitExceeded { iteration: u64, attempts: u32 },
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_phase(self, phase: &'static str) -> Error {
        match self {
            e @ Error::Phase { .. } => e,
            e => Error::Phase {
                phase,
                source: Box::new(e),
            },
        }
    }

    /// Strips any phase labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            e => e,
        }
    }
}
