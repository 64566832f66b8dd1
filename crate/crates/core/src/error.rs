//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building scenarios, simulating, or
/// solving.
#[derive(Debug, Error)]
pub enum Error {
    /// The requested basal rate would be negative (E/g0 < G for Bergman, or
    /// the target glucose exceeds the zero-input steady state for Hovorka).
    #[error("infeasible basal rate: {0}")]
    InfeasibleBasal(String),

    /// A root-finder failed to converge.
    #[error("convergence failure: {0}")]
    ConvergenceError(String),

    /// The model left its valid domain (e.g. Hovorka glucose mass reached
    /// zero, which makes the clearance terms singular).
    #[error("model domain violation: {0}")]
    DomainError(String),

    /// A state component became non-finite during integration.
    #[error("numerical failure: {0}")]
    NumericalError(String),

    /// Two trajectories were compared sample-by-sample but live on
    /// different time grids.
    #[error("trajectory grids differ: {0}")]
    GridMismatch(String),

    /// The floor exceeds the glucose value at the delivery time, so no
    /// bolus magnitude can make the input proper.
    #[error("floor is infeasible: {0}")]
    InfeasibleFloor(String),

    /// Even a zero bolus already drives the response below the floor.
    #[error("no floor contact possible: {0}")]
    NoFloorContact(String),

    /// An iterative solver hit its iteration cap.
    #[error("iteration limit reached: {0}")]
    IterationLimit(String),

    /// The duration bracket could not be established within the given
    /// bounds (no duration classified on the required side).
    #[error("no bracketing classification found: {0}")]
    NoGammaOptimalFound(String),

    /// The optimizer's hypothesis fails: the disturbance never pushes the
    /// glucose above its steady state, so there is no peak to lower.
    #[error("optimizer precondition failed: {0}")]
    PreconditionFailed(String),

    /// A candidate response could not be assigned to either side of the
    /// bracket even after resampling.
    #[error("shape classification ambiguous: {0}")]
    ClassificationAmbiguous(String),

    /// The delivery-time window does not contain a sign change of the
    /// maxima-balance function, nor an interior minimum of the peak.
    #[error("delivery window too narrow: {0}")]
    WindowTooNarrow(String),

    /// Scenario/parameter validation failure.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Scenario or preset file could not be read or parsed.
    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
