use std::path::PathBuf;

use thiserror::Error;

/// A single unparseable input row, kept alongside the rows that did parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{} row(s) failed to parse; first: {}", .0.len(), .0[0])]
    Rows(Vec<RowError>),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("missing problem metadata for problem_id {0:?}")]
    MissingMeta(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("symbol {symbol} out of range for {n_symbols} symbols")]
    SymbolOutOfRange { symbol: usize, n_symbols: usize },

    #[error("sequence has zero probability under the model")]
    ImpossibleSequence,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("design matrix is rank deficient; dependent columns: {}", .0.join(", "))]
    Collinear(Vec<String>),

    #[error("p-value {0} outside [0, 1]")]
    PValueRange(f64),

    #[error("missing input file(s): {}", .0.join(", "))]
    MissingInputs(Vec<String>),

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by `--json-errors`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Schema(_) => "schema",
            Error::Rows(_) => "rows",
            Error::Integrity(_) => "integrity",
            Error::MissingMeta(_) => "missing_meta",
            Error::InvalidParams(_) => "invalid_params",
            Error::SymbolOutOfRange { .. } => "symbol_out_of_range",
            Error::ImpossibleSequence => "impossible_sequence",
            Error::Empty(_) => "empty",
            Error::Collinear(_) => "collinear",
            Error::PValueRange(_) => "p_value_range",
            Error::MissingInputs(_) => "missing_inputs",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
