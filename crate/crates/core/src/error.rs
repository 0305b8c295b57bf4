//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::smiles::FixedPointTrace;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented domain (non-positive strike, vol, ...).
    #[error("invalid input: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    /// Free-form invalid input that does not reduce to a single number.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The premium-adjusted delta equation has no root in the strike bracket.
    #[error("no strike solves the delta equation in [{lo}, {hi}]")]
    NoSolution { lo: f64, hi: f64 },

    /// A bracketing solver could not find a sign change.
    #[error("root not bracketed: f({lo}) and f({hi}) have the same sign")]
    NoBracket { lo: f64, hi: f64 },

    /// An iterative solver ran out of iterations.
    #[error("{method} did not converge after {iterations} iterations")]
    NotConverged {
        method: &'static str,
        iterations: usize,
    },

    /// Fixed-point strike lookup failed; the trace is kept for diagnostics.
    #[error("fixed-point volatility lookup diverged after {} iterations", .0.iterations)]
    FixedPointDiverged(Box<FixedPointTrace>),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("spline nodes are not strictly increasing at index {index}")]
    NodesNotMonotone { index: usize },

    #[error("calibration failed (objective {objective:e}): {reason}")]
    CalibrationFailed { objective: f64, reason: String },

    /// Total variance is not positive at the given log-moneyness.
    #[error("non-positive total variance at log-moneyness {y}")]
    NegativeVariance { y: f64 },

    #[error("price {price} violates the {bound} no-arbitrage bound {limit}")]
    PriceOutOfBounds {
        price: f64,
        bound: &'static str,
        limit: f64,
    },

    #[error("quadrature failed on [{lo}, {hi}] after {nodes} nodes (error estimate {error:e})")]
    Quadrature {
        lo: f64,
        hi: f64,
        nodes: usize,
        error: f64,
    },

    #[error("fixture parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reject non-finite or non-positive values.
pub(crate) fn ensure_positive(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}
