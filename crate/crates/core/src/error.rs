use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("taxonomy cycle: {}", .0.join(" -> "))]
    TaxonomyCycle(Vec<String>),

    #[error("concept '{0}' does not reach the taxonomy root")]
    Unreachable(String),

    #[error("graph with {nodes} nodes exceeds exact-solver limit of {limit}")]
    ExactLimit { nodes: usize, limit: usize },

    #[error("exact GED timed out; best lower bound {lower_bound}, upper bound {upper_bound}")]
    Timeout { lower_bound: f64, upper_bound: f64 },

    #[error("inconsistent edit path: {0}")]
    InconsistentPath(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no counterfactual in target class {0}")]
    NoCounterfactual(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::TaxonomyCycle(_) => "taxonomy_cycle",
            Error::Unreachable(_) => "taxonomy_unreachable",
            Error::ExactLimit { .. } => "exact_limit",
            Error::Timeout { .. } => "timeout",
            Error::InconsistentPath(_) => "inconsistent_path",
            Error::Config(_) => "config",
            Error::Numerical(_) => "numerical",
            Error::NoCounterfactual(_) => "no_counterfactual",
            Error::Argument(_) => "argument",
            Error::Io(_) => "io",
        }
    }

    /// Converts a serde_json error into a parse error carrying the byte offset
    /// into `input`.
    pub(crate) fn from_json(err: serde_json::Error, input: &[u8]) -> Self {
        let offset = byte_offset(input, err.line(), err.column());
        Error::Parse {
            offset,
            message: err.to_string(),
        }
    }
}

fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut start = 0usize;
    for _ in 1..line {
        match input[start..].iter().position(|&b| b == b'\n') {
            Some(p) => start += p + 1,
            None => break,
        }
    }
    (start + column.saturating_sub(1)).min(input.len())
}
