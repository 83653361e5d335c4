use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluator returned a non-finite value on path {path_index}")]
    NonFinite { path_index: usize },

    #[error("quadrature failed: {reason} (estimate {estimate:e}, error {abs_err:e}, {intervals} intervals)")]
    Quadrature { reason: &'static str, estimate: f64, abs_err: f64, intervals: usize },

    #[error("model `{model}` is not supported here: {reason}")]
    UnsupportedModel { model: &'static str, reason: &'static str },

    #[error("model contract violated on path {path_index}: {reason}")]
    ContractViolation { path_index: usize, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invariant failure: {0}")]
    Invariant(String),
}

pub type Result<T> = core::result::Result<T, Error>;
