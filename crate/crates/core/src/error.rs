//! Error types shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- module composition --
    #[error("module `{0}` is already registered")]
    DuplicateModule(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("module `{module}` requires input table `{table}` which is missing")]
    MissingInput { module: String, table: String },
    #[error("registered component `{0}` was never defined by any module")]
    UnresolvedRegistryEntry(String),
    #[error("{op} may only be called during the {expected} phase (current phase: {actual})")]
    PhaseViolation {
        op: String,
        expected: String,
        actual: String,
    },
    #[error("component `{0}` is already registered")]
    DuplicateComponent(String),

    // -- model construction --
    #[error("variable `{0}` is already defined")]
    DuplicateVariable(String),
    #[error("constraint `{0}` is already defined")]
    DuplicateConstraint(String),
    #[error("variable `{name}` has lower bound {lower} above upper bound {upper}")]
    InvalidBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite coefficient {0}")]
    NonFiniteCoefficient(f64),

    // -- timescales --
    #[error("timepoint `{timepoint}` references unknown timeseries `{timeseries}`")]
    OrphanTimepoint {
        timepoint: String,
        timeseries: String,
    },
    #[error("timeseries `{timeseries}` references unknown period `{period}`")]
    OrphanTimeseries { timeseries: String, period: String },
    #[error("timeseries `{0}` has non-contiguous timepoint positions")]
    NonContiguousPositions(String),

    // -- input data --
    #[error("input error in `{table}` row {row}: {message}")]
    InputError {
        table: String,
        row: usize,
        message: String,
    },
    #[error("integrity error: {0}")]
    IntegrityError(String),
    #[error("config error: {0}")]
    ConfigError(String),
    #[error("storage project `{0}` is buildable but has no energy capital cost")]
    MissingEnergyCost(String),

    // -- solver --
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(u64),
    #[error("branch-and-bound node limit ({0}) reached")]
    NodeLimit(u64),
    #[error("external solver failed: {0}")]
    SolverProcessFailure(String),
    #[error("solution parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
