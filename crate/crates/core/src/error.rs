use thiserror::Error;

use crate::grid::Representation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid too narrow: {outside_mass:.3e} of the packet lies outside the grid")]
    GridTooNarrow { outside_mass: f64 },

    #[error("expected a {expected:?}-space wave function, found {found:?}")]
    RepresentationMismatch {
        expected: Representation,
        found: Representation,
    },

    #[error("wave functions live on different grids")]
    GridMismatch,

    #[error("time step {dt:.3e} exceeds the stability limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("initial packet overlaps the barrier: mass {overlap:.3e} in the barrier region")]
    InitialOverlap { overlap: f64 },

    #[error("boundary leakage {lost:.3e} exceeds tolerance after step {step}")]
    BoundaryLeakage { lost: f64, step: usize },

    #[error("packets not separated: mass {overlap:.3e} still in the barrier region")]
    PrematureMeasurement { overlap: f64 },

    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },

    #[error("moment closure produced a non-positive variance at step {step}")]
    ClosureInconsistent { step: usize },

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("{quantity} is undefined for these parameters: {reason}")]
    Undefined {
        quantity: &'static str,
        reason: &'static str,
    },

    #[error("delta-function limit: {0}")]
    DeltaLimit(&'static str),

    #[error("degenerate limit: {0}")]
    DegenerateLimit(&'static str),

    #[error("momentum range too short: density at the range edge is {edge_ratio:.3e} of the peak")]
    GridRangeInsufficient { edge_ratio: f64 },

    #[error("at least {need} trajectories are required, got {got}")]
    TooFewSeeds { got: usize, need: usize },

    #[error("{0} is not supported here")]
    Unsupported(&'static str),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::NonFinite { .. }
                | Error::ClosureInconsistent { .. }
                | Error::BoundaryLeakage { .. }
                | Error::GridRangeInsufficient { .. }
        )
    }
}
