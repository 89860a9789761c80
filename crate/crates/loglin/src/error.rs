//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by table construction, ingestion, design building,
/// model fitting, and reporting.
#[derive(Debug, Error)]
pub enum Error {
    // --- contingency tables ---
    #[error("factor `{0}` must have at least 2 levels")]
    TooFewLevels(String),
    #[error("factor `{factor}` has duplicate level `{level}`")]
    DuplicateLevel { factor: String, level: String },
    #[error("duplicate factor name `{0}`")]
    DuplicateFactor(String),
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("unknown level `{level}` for factor `{factor}`")]
    UnknownLevel { factor: String, level: String },
    #[error("cell ({0}) specified more than once")]
    DuplicateCell(String),
    #[error("cell tuple has {got} labels but the table has {want} factors")]
    CellArity { got: usize, want: usize },
    #[error("margin requires a non-empty subset of the table's factors")]
    EmptyMargin,
    #[error("collapse mapping does not cover level `{0}`")]
    UnmappedLevel(String),
    #[error("odds ratios undefined: cell ({0}) is zero")]
    ZeroCell(String),
    #[error("conditional odds ratios need two distinct row/column factors and a third conditioning factor")]
    BadOddsRatioRequest,

    // --- ingest ---
    #[error("input is missing configured column `{0}`")]
    MissingColumn(String),
    #[error("date window start {from} is after end {to}")]
    InvalidWindow { from: String, to: String },
    #[error("county `{0}` is not mapped by the region scheme")]
    UnmappedCounty(String),
    #[error("age band `{0}` is not mapped by the age scheme")]
    UnmappedAgeBand(String),
    #[error("unrecognized gender label `{0}`")]
    UnknownGender(String),
    #[error("{count} row(s) failed to parse (first: line {line}: {message})")]
    StrictParse { count: usize, line: u64, message: String },

    // --- design ---
    #[error("cannot parse model term `{0}`")]
    BadModelTerm(String),
    #[error("model is not hierarchical: `{term}` lacks lower-order term `{missing}`")]
    NonHierarchical { term: String, missing: String },
    #[error("lattice enumeration requires exactly 3 factors, got {0}")]
    LatticeArity(usize),

    // --- fitting ---
    #[error("design has {rows} rows but the table has {cells} cells")]
    DesignShape { rows: usize, cells: usize },
    #[error("design matrix is rank deficient (rank {rank} of {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error("IRLS step increased deviance even after {0} halvings")]
    DivergentStep(usize),
    #[error("fit did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("log-likelihood undefined: fitted mean 0 where observed count > 0")]
    ZeroFittedMean,
    #[error("model spec has no closed form: {0}")]
    NoClosedForm(String),
    #[error("closed form undefined: conditioning margin has a zero entry")]
    ZeroConditioningMargin,

    // --- inference ---
    #[error("operation requires a converged fit")]
    NotConverged,
    #[error("contrast weights have length {got}, expected {want}")]
    WeightLength { got: usize, want: usize },
    #[error("contrast variance is negative ({0}); covariance matrix is corrupt")]
    NegativeVariance(f64),
    #[error("no coefficient labelled `{0}` in this fit")]
    UnknownCoefficient(String),

    // --- CLI / config ---
    #[error("invalid value for {what}: `{value}`")]
    InvalidValue { what: &'static str, value: String },
    #[error("config file {path}: {message}")]
    Config { path: String, message: String },
    #[error("no input files given (pass --input or set `input` in the config file)")]
    NoInput,

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
