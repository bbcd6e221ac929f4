use thiserror::Error;

/// Errors raised by the bound calculators, builders and the simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("norm not finite within range [{lo:e}, {hi:e}]")]
    NormNotFinite { lo: f64, hi: f64 },

    #[error("moment of order {order} is not finite")]
    NonFiniteMoment { order: u32 },

    #[error("degenerate profile; use bernstein_tail directly")]
    DegenerateProfile,

    #[error("degenerate labels: tau_* is zero but L_* tau_* is {l_tau}")]
    DegenerateLabels { l_tau: f64 },

    #[error("tree certificate violated at node {node} (generation {generation}): {reason}")]
    Certificate {
        node: usize,
        generation: usize,
        reason: String,
    },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("depth {depth} overflows generation sizes; admissible depths are 0..={max}")]
    SizeOverflow { depth: usize, max: usize },

    #[error("bracket level {0} is missing")]
    MissingLevel(usize),

    #[error("cannot cover the class: {0}")]
    Coverage(String),

    #[error("generalized bracket certificate unattainable with K = {k}; minimal feasible K found by scan is {minimal_k:?}")]
    GeneralizedInfeasible { k: f64, minimal_k: Option<f64> },

    #[error("truncation levels must be positive and nonincreasing: {0}")]
    TruncationLevels(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Checks that `value` is finite and `>= 0`.
pub(crate) fn nonnegative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("expected a finite value >= 0, got {value}")))
    }
}

/// Checks that `value` is finite and `> 0`.
pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("expected a finite value > 0, got {value}")))
    }
}
