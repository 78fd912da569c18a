use thiserror::Error;

use crate::spectrum::LorentzianFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violates a type invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The intrinsic gain g_B is needed but was not configured.
    #[error("intrinsic Brillouin gain is not set")]
    MissingIntrinsicGain,

    #[error("numerical failure in {module}: {detail}")]
    Numerical { module: &'static str, detail: String },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("frequency grid does not cover the response: {0}")]
    GridCoverage(String),

    #[error("Lorentzian fit did not converge after {iterations} iterations")]
    FitNonConvergence {
        iterations: usize,
        best: Box<LorentzianFit>,
    },

    #[error("bisection failed to bracket a root on [{lo:e}, {hi:e}]: {detail}")]
    Bracket { lo: f64, hi: f64, detail: String },

    /// A Langevin trajectory failed; `index` is its position in the ensemble.
    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            module,
            detail: detail.into(),
        }
    }

    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. }
            | Error::Singular(_)
            | Error::FitNonConvergence { .. }
            | Error::Bracket { .. } => true,
            Error::Trajectory { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
