use thiserror::Error;

/// Errors raised by the valuation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StockLoanError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("negative discriminant μ²−2λ = {0}")]
    NegativeDiscriminant(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("margin too large: k = {k} exceeds h(q/a) = {bound}")]
    MarginTooLarge { k: f64, bound: f64 },

    #[error("no sign change of the boundary equation on ({lower}, {upper}]: {reason}")]
    BracketFailure { lower: f64, upper: f64, reason: String },

    #[error("negative service fee c = {0}: parameters are arbitrage-inconsistent")]
    NegativeFee(f64),

    #[error("target fee {target} outside achievable range [{low}, {high}]")]
    OutOfRange { target: f64, low: f64, high: f64 },

    #[error("fee is not nonincreasing in the barrier: c(a_lo) = {at_low}, c(a_hi) = {at_high}")]
    MonotonicityViolation { at_low: f64, at_high: f64 },

    #[error("invalid simulation config: {0}")]
    Config(String),
}

pub type Result<T, E = StockLoanError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> StockLoanError {
    StockLoanError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
