use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transfer function evaluated at its pole s = {s} (tau_relax = {tau_relax:e})")]
    TransferPole { s: num_complex::Complex64, tau_relax: f64 },

    #[error("invalid material `{name}`: {}", violations.join("; "))]
    InvalidMaterial { name: String, violations: Vec<String> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("FFT weights failed the realness check: max |Im| = {max_imag:e} exceeds {limit:e}")]
    WeightsNotConverged { max_imag: f64, limit: f64 },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("weight table `{material}` has {available} entries but lag {required} was requested")]
    InsufficientWeights { material: String, available: usize, required: usize },

    #[error("eigenvalue estimate did not converge after {iterations} iterations")]
    EigenNotConverged { iterations: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },

    #[error("{0} is not computable for this state")]
    NotComputable(&'static str),

    #[error("unsupported initial condition: {0}")]
    UnsupportedInitialCondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
