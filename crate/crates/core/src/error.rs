use std::fmt;

use thiserror::Error;

/// Pipeline stage an error surfaced in; attached by [`crate::analysis::run_analysis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Formula,
    Ingestion,
    Summary,
    Hypotheses,
    Statistics,
    Resampling,
    Confidence,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Formula => "formula",
            Stage::Ingestion => "ingestion",
            Stage::Summary => "summary",
            Stage::Hypotheses => "hypotheses",
            Stage::Statistics => "statistics",
            Stage::Resampling => "resampling",
            Stage::Confidence => "confidence",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("formula error: {0}")]
    Formula(String),

    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),

    #[error("unknown effect `{0}`")]
    UnknownEffect(String),

    #[error("unknown factor `{name}` (valid factors: {valid})")]
    UnknownFactor { name: String, valid: String },

    #[error("insufficient data in cell {cell}: n = {n}, at least 2 subjects required")]
    InsufficientData { cell: String, n: usize },

    #[error("empty cell {cell}: no subjects observed for this factor level combination")]
    EmptyCell { cell: String },

    #[error("missing data for subject `{subject}`: {detail}")]
    MissingData { subject: String, detail: String },

    #[error("duplicate record for subject `{subject}`, component {component}")]
    DuplicateRecord { subject: String, component: String },

    #[error("subject `{subject}` appears in more than one cell ({first} and {second})")]
    SubjectInMultipleCells {
        subject: String,
        first: String,
        second: String,
    },

    #[error("unknown column `{name}` (available columns: {available})")]
    UnknownColumn { name: String, available: String },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{0}")]
    UnsupportedStatistic(String),

    #[error("{0}")]
    UnsupportedScheme(String),

    #[error("degenerate hypothesis: {0}")]
    DegenerateHypothesis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("plotting not possible: {0}")]
    NotPlottable(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    InStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn in_stage(self, stage: Stage) -> Error {
        match self {
            e @ Error::InStage { .. } => e,
            e => Error::InStage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Process exit code: 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InStage { source, .. } => source.exit_code(),
            Error::NotPsd { .. } | Error::Numerical(_) | Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}
