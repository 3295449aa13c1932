use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular to working precision (pivot {pivot:e} in column {col})")]
    SingularMatrix { col: usize, pivot: f64 },

    #[error("matrix is not stochastic: row {row} {detail}")]
    NotStochastic { row: usize, detail: String },

    #[error("transition matrix P_{k} is not stochastic: row {row} {detail}")]
    NotStochasticAt { k: usize, row: usize, detail: String },

    #[error("matrix is not a rate matrix: row {row} {detail}")]
    NotRateMatrix { row: usize, detail: String },

    #[error("chain is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("no contracting power ||A^l|| < 1 found for l <= {0}")]
    NotContracting(usize),

    #[error("sequence horizon {available} is shorter than the {needed} steps required")]
    HorizonExceeded { needed: usize, available: usize },

    #[error("second-order data missing: {0}")]
    MissingSecondOrder(&'static str),

    #[error("integration step {h} exceeds the stability limit {limit}")]
    StepTooLarge { h: f64, limit: f64 },

    #[error("probability mass went negative ({0:e})")]
    NegativeMass(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that signal a violated model hypothesis rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::NotIrreducible(_)
                | Error::NotContracting(_)
                | Error::StepTooLarge { .. }
                | Error::NegativeMass(_)
                | Error::NotStochasticAt { .. }
        )
    }
}
