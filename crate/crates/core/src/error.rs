use thiserror::Error;

/// Errors produced by model validation, solvers, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("piece on [{lo}, {hi}] has degree {degree}; the closed-form solver needs affine pieces")]
    NotAffine { lo: f64, hi: f64, degree: usize },

    #[error("{0} breakpoints exceed the configuration-enumeration cap of 12")]
    TooManyBreakpoints(usize),

    #[error("no candidate configuration satisfies the value-function conditions")]
    NoValidConfiguration,

    #[error("policy iteration did not converge within {max_sweeps} sweeps")]
    NonConvergence { max_sweeps: usize },

    #[error("full-information check not applicable: {0}")]
    NotApplicable(String),

    #[error("agent payoffs of actions `{0}` and `{1}` are not single-crossing")]
    NotSingleCrossing(String, String),

    #[error("failed to parse model file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
