use thiserror::Error;

/// Errors produced by the estimation pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("column {0} is constant")]
    ConstantColumn(usize),

    #[error("too few rows: need at least {needed}, got {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("bandwidth must be positive and finite, got {0}")]
    BadBandwidth(f64),

    #[error("sample lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("density tables were built on different grids")]
    GridMismatch,

    #[error("at pair ({i}, {j}): {source}")]
    AtPair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage list is empty")]
    EmptyStageList,

    #[error("weight matrix is not symmetric at ({0}, {1})")]
    NonSymmetricWeights(usize, usize),

    #[error("requested {requested} edges but only {max} pairs exist")]
    TooManyEdges { requested: usize, max: usize },

    #[error("transform derivative vanishes or diverges at coordinate {0}")]
    SingularJacobian(usize),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),

    #[error("non-numeric cell {value:?} at row {row}, column {col}")]
    NonNumericCell {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("non-positive price {value} at row {row}, column {col}")]
    NonPositivePrice { row: usize, col: usize, value: f64 },

    #[error("graphs have different vertex labels")]
    VertexMismatch,

    #[error("path is empty")]
    EmptyPath,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable code for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::NotSymmetric(..) => "not_symmetric",
            Error::ConstantColumn(_) => "constant_column",
            Error::TooFewRows { .. } => "too_few_rows",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotConverged { .. } => "not_converged",
            Error::AtLambda { source, .. } | Error::AtPair { source, .. } => source.code(),
            Error::BadBandwidth(_) => "bad_bandwidth",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::EmptyStageList => "empty_stage_list",
            Error::NonSymmetricWeights(..) => "non_symmetric_weights",
            Error::TooManyEdges { .. } => "too_many_edges",
            Error::SingularJacobian(_) => "singular_jacobian",
            Error::Parse { .. } => "parse_error",
            Error::DuplicateColumn(_) => "duplicate_column",
            Error::NonNumericCell { .. } => "non_numeric_cell",
            Error::NonPositivePrice { .. } => "non_positive_price",
            Error::VertexMismatch => "vertex_mismatch",
            Error::EmptyPath => "empty_path",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure, 4 for
    /// internal invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AtLambda { source, .. } | Error::AtPair { source, .. } => source.exit_code(),
            Error::NotConverged { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::SingularJacobian(_) => 3,
            Error::Internal(_) => 4,
            _ => 2,
        }
    }
}
