use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cycle detected through node `{0}`")]
    Cycle(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("class {class} maps to non-leaf node `{node}`")]
    NonLeafClass { class: usize, node: String },

    #[error("class indices must be contiguous from 0: {0}")]
    ClassIndex(String),

    #[error("hierarchy is not a tree: node `{0}` has more than one parent")]
    NotATree(String),

    #[error("no path between classes {0} and {1}")]
    Disconnected(usize, usize),

    #[error("class {0}: no matching ancestor")]
    NoMatchingAncestor(usize),

    #[error("invalid label space: {0}")]
    LabelSpace(String),

    #[error("label {label} out of range (label count {count})")]
    LabelOutOfRange { label: usize, count: usize },

    #[error("invalid prediction log: {0}")]
    Log(String),

    #[error("invalid metric input: {0}")]
    Metric(String),

    #[error("invalid feature set: {0}")]
    Features(String),

    #[error("class {class} has {have} examples, need {need}")]
    InsufficientExamples {
        class: usize,
        have: usize,
        need: usize,
    },

    #[error("undefined statistic: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown format: magic {0:?}")]
    UnknownFormat(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
