use thiserror::Error;

use crate::solver::GroundState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a closed-form function or
    /// violates a parameter constraint.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A field was used with a grid it was not sampled on.
    #[error("usage error: {0}")]
    Usage(String),

    /// The ray through the state never crosses the Nehari manifold.
    #[error("degenerate ray: the quartic part of the functional vanishes on this state")]
    DegenerateRay,

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Box<GroundState>,
    },

    #[error("bracketing error: {0}")]
    Bracket(String),

    #[error("shooting oracle failed: {0}")]
    Oracle(String),

    #[error("refusing unconverged ground state")]
    Unconverged,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::DegenerateRay => "degenerate_ray",
            Error::Convergence { .. } => "convergence",
            Error::Bracket(_) => "bracket",
            Error::Oracle(_) => "oracle",
            Error::Unconverged => "unconverged",
        }
    }
}
