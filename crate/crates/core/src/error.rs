use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("expected {expected} matrix entries, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian (skew part norm {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (|U'U - 1| = {0:e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    NotDensity(String),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("operator function outside its domain: {0}")]
    Domain(String),

    #[error("support of the first state is not contained in the support of the second")]
    SupportViolation,

    #[error("degenerate process: H = H' = 0, work is always zero")]
    DegenerateProcess,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid measurement scheme: {0}")]
    InvalidScheme(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
