//! Error type shared across the library.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor invariant was violated; names the offending field.
    InvalidParameter { name: &'static str, message: String },
    /// The volatility matrix is not invertible (|rho| = 1).
    SingularVolatility,
    /// Option analytics requested at zero time to maturity or zero
    /// volatility; the caller must branch to the intrinsic value.
    DegenerateOption,
    /// A time-to-horizon kernel was requested at or beyond the horizon.
    DegenerateHorizon,
    /// The guarantee cannot be financed from the initial endowment.
    Infeasible { message: String },
    /// A bracketed solve ran out of iterations or never bracketed a root.
    NoConvergence {
        context: &'static str,
        residual: f64,
    },
    /// An asset price of zero where units must be computed.
    ZeroPrice,
    /// A ratio whose Monte Carlo denominator estimate is zero.
    ZeroDenominator,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, message } => {
                write!(f, "invalid parameter `{name}`: {message}")
            }
            Error::SingularVolatility => {
                write!(f, "volatility matrix is singular (|rho| = 1)")
            }
            Error::DegenerateOption => {
                write!(
                    f,
                    "option analytics degenerate (zero maturity or volatility)"
                )
            }
            Error::DegenerateHorizon => {
                write!(f, "kernel requested at or beyond the horizon")
            }
            Error::Infeasible { message } => write!(f, "infeasible problem: {message}"),
            Error::NoConvergence { context, residual } => {
                write!(f, "no convergence in {context} (residual {residual:.3e})")
            }
            Error::ZeroPrice => write!(f, "asset price is zero"),
            Error::ZeroDenominator => write!(f, "Monte Carlo denominator estimate is zero"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
