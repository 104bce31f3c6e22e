use thiserror::Error;

/// Everything that can go wrong while evaluating lattice sums, classifiers or witnesses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("e_q has a pole: factor {index} vanishes")]
    Pole { index: usize },

    #[error("{what} did not converge within {terms} terms")]
    NonConvergence { what: &'static str, terms: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("density is not normalized: total mass {mass}")]
    NotNormalized { mass: String },

    #[error("densities carry different q ({left} vs {right})")]
    QMismatch { left: String, right: String },

    #[error("negative lattice value {value} at j = {j}")]
    NegativeDensity { j: i64, value: String },

    #[error("infeasible witness: {0}")]
    InfeasibleWitness(String),

    #[error("precision exhausted: requires ≥ {required} digits, have {available}")]
    PrecisionExhausted { required: u32, available: u32 },

    #[error("q-moment {n} of the witness differs from the base: residual {residual}")]
    MomentMismatch { n: u32, residual: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
