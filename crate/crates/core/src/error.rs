use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("ids missing from feature store: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("{path}: row {row}, col {col}: {msg}")]
    Cell {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("{path}: line {line}: {msg}")]
    Line {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("AUC undefined: labels contain a single class")]
    UndefinedAuc,

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error at {pointer}: {msg}")]
    Config { pointer: String, msg: String },

    #[error("combination `{combo}`: {source}")]
    Combination {
        combo: String,
        #[source]
        source: Box<Error>,
    },

    #[error("candidate {index}: {source}")]
    Candidate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("http error: {0}")]
    Http(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn in_combination(self, combo: &str) -> Self {
        Error::Combination {
            combo: combo.to_string(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid",
            Error::DuplicateId(_) => "duplicate_id",
            Error::MissingIds(_) => "missing_ids",
            Error::UnknownDataset(_) => "unknown_dataset",
            Error::EmptySplit(_) => "empty_split",
            Error::Cell { .. } => "cell",
            Error::Line { .. } => "line",
            Error::Dimension { .. } => "dimension",
            Error::UndefinedAuc => "undefined_auc",
            Error::Degenerate(_) => "degenerate",
            Error::Numerical(_) => "numerical",
            Error::Config { .. } => "config",
            Error::Combination { .. } => "combination",
            Error::Candidate { .. } => "candidate",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Http(_) => "http",
        }
    }
}
