use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid landmark subset: {0}")]
    InvalidSubset(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("negative diagonal entry {value} at index {index}")]
    NegativeDiagonal { index: usize, value: f64 },

    #[error(
        "matrix is not positive semi-definite: min eigenvalue {min_eigenvalue} below -{tolerance}"
    )]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error(
        "symmetric eigensolver did not converge for order {order} within {iterations} iterations"
    )]
    NoConvergence { order: usize, iterations: usize },

    #[error("degenerate kernel: zero degree at index {index}")]
    ZeroDegree { index: usize },

    #[error(
        "degenerate weights: only {positive} indices have positive weight, {requested} requested"
    )]
    DegenerateWeights { positive: usize, requested: usize },

    #[error("degenerate distribution: every {k}-subset has zero determinant")]
    DegenerateDistribution { k: usize },

    #[error("enumeration of {count} subsets exceeds the limit of {limit}")]
    TooManySubsets { count: u128, limit: u128 },

    #[error("sampler could not find a nonsingular initial subset after {attempts} attempts")]
    SamplerInit { attempts: usize },

    #[error("rank exhausted: greedy selection reached {achieved} of {requested} landmarks")]
    RankExhausted { achieved: usize, requested: usize },

    #[error("graph is disconnected: {components} connected components")]
    Disconnected { components: usize },

    #[error("trivial eigenpair is ambiguous: eigenvalue 1 has multiplicity {multiplicity}")]
    AmbiguousTrivialPair { multiplicity: usize },

    #[error("insufficient landmarks: {landmarks} landmarks cannot support a {dim}-dimensional embedding")]
    InsufficientLandmarks { landmarks: usize, dim: usize },

    #[error("kernel has zero trace")]
    ZeroTrace,
}

impl Error {
    /// True for failures caused by the numerical content of the data rather
    /// than by how the computation was requested.
    pub fn is_numerical_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::NoConvergence { .. }
                | Error::ZeroDegree { .. }
                | Error::DegenerateWeights { .. }
                | Error::DegenerateDistribution { .. }
                | Error::SamplerInit { .. }
                | Error::RankExhausted { .. }
                | Error::Disconnected { .. }
                | Error::AmbiguousTrivialPair { .. }
                | Error::ZeroTrace
        )
    }
}

pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
