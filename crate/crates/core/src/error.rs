use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("empty network")]
    EmptyNetwork,
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` has no conditional probability table")]
    MissingCpt(String),
    #[error("variable `{0}` has more than one conditional probability table")]
    DuplicateCpt(String),
    #[error("cpt for `{child}` lists parent `{parent}` more than once")]
    DuplicateParent { child: String, parent: String },
    #[error("cycle detected through variable `{0}`")]
    Cycle(String),
    #[error("cpt for `{child}` has {found} entries, expected {expected}")]
    CptArity {
        child: String,
        expected: usize,
        found: usize,
    },
    #[error("cpt for `{child}` entry {index} is {value}, outside [0, 1]")]
    ProbabilityRange {
        child: String,
        index: usize,
        value: f64,
    },
    #[error("network has {size} variables, enumeration limit is {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("evidence has zero probability")]
    ZeroProbabilityEvidence,
    #[error("evidence value for `{0}` must be 0 or 1")]
    EvidenceValue(String),
    #[error("variable {0} is part of the evidence")]
    ObservedQuery(usize),
    #[error("evidence is impossible under every mixture component")]
    ImpossibleEvidence,
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mixture variables do not match the network: {0}")]
    VariableMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
