//! Error type shared by every module.
//!
//! Each variant carries a stable machine-readable [`Error::reason`] code and
//! belongs to one [`ErrorClass`], which front ends map to exit statuses.

use thiserror::Error;

/// Broad category of a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Inputs violate a documented precondition.
    Validation,
    /// A numerical routine could not produce an answer.
    Numerical,
}

/// Errors raised by the solvers, verifiers and simulators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// The density vanishes at an interior point where a hazard rate is needed.
    #[error("density vanishes at interior value {v}")]
    DegenerateDensity { v: f64 },
    /// The distribution fails Myerson regularity on the check grid.
    #[error("distribution is not regular: virtual value decreases near v = {at}")]
    IrregularDistribution { at: f64 },
    /// The mean is not 1 and normalization was neither requested nor waived.
    #[error("distribution mean is {mean}, expected 1 (request normalization or allow unnormalized)")]
    NotNormalized { mean: f64 },
    /// Malformed distribution description.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// A quantity is undefined for a support starting at zero.
    #[error("unsupported support: {0}")]
    UnsupportedSupport(String),
    /// The frontier weight exceeds its admissible cap.
    #[error("weight w_L = {wl} exceeds the admissible cap {cap}")]
    WeightOutOfRange { wl: f64, cap: f64 },
    /// Malformed model parameters.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// A model precondition (parameter inequality) does not hold.
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    /// Requested enumeration is larger than the supported budget.
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    /// A screening set has too few distinct image points.
    #[error("degenerate screening set: {0}")]
    DegenerateSet(String),
    /// The discounted solver was called with a non-positive discount rate.
    #[error("discount rate must be positive; use the finite-horizon solver")]
    UseFiniteHorizon,
    /// A bracketing root finder found no sign change.
    #[error("root not bracketed on [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },
    /// Membership queries are only answered for reasonable payoffs.
    #[error("payoff pair is outside the reasonable region (pi_H < pi_L or negative payoff)")]
    NotReasonable,
}

impl Error {
    /// Stable snake_case reason code.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::DegenerateDensity { .. } => "degenerate_density",
            Error::IrregularDistribution { .. } => "irregular_distribution",
            Error::NotNormalized { .. } => "not_normalized",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::UnsupportedSupport(_) => "unsupported_support",
            Error::WeightOutOfRange { .. } => "weight_out_of_range",
            Error::InvalidParams(_) => "invalid_params",
            Error::PreconditionFailed(_) => "precondition_failed",
            Error::BudgetExceeded(_) => "budget_exceeded",
            Error::DegenerateSet(_) => "degenerate_set",
            Error::UseFiniteHorizon => "use_finite_horizon",
            Error::RootNotBracketed { .. } => "root_not_bracketed",
            Error::NotReasonable => "not_reasonable",
        }
    }

    /// Category used to pick an exit status.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::RootNotBracketed { .. } | Error::BudgetExceeded(_) | Error::DegenerateDensity { .. } => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Validation,
        }
    }
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, Error>;
