use thiserror::Error;

/// Errors shared across the library. Each variant names the violated
/// precondition rather than the call site that noticed it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("halfwidth must be positive and finite, got {0}")]
    BadHalfwidth(f64),

    #[error("node count {got} is below the minimum of {min}")]
    NodeCount { got: usize, min: usize },

    #[error("sample length {got} does not match grid size {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("momentum grid mixes signs without a panel boundary at p = 0")]
    GridNotSplitAtZero,

    #[error("momentum grid is not mirror symmetric about p = 0")]
    GridNotMirrorSymmetric,

    #[error(
        "momentum grid [{lo}, {hi}] does not cover the packet support [{need_lo}, {need_hi}]"
    )]
    InsufficientCoverage {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("on-grid norm deficit {deficit:e} exceeds the coverage tolerance {tol:e}")]
    NormDeficit { deficit: f64, tol: f64 },

    #[error("momentum must be nonzero and finite, got {0}")]
    BadMomentum(f64),

    #[error("position must be finite, got {0}")]
    NonFinitePosition(f64),

    #[error("time grid needs t_min < t_max and at least 2 nodes")]
    BadTimeGrid,

    #[error("physical units must be positive and finite")]
    BadUnits,

    #[error("invalid potential: {0}")]
    BadPotential(String),

    #[error("invalid packet: {0}")]
    BadPacket(String),

    #[error("invalid field: {0}")]
    BadField(String),

    #[error("spatial grid needs min < max and at least 2 nodes")]
    BadSpatialGrid,

    #[error("position {x} lies outside the grid [{min}, {max}]")]
    OutsideGrid { x: f64, min: f64, max: f64 },

    #[error(
        "field amplitude {amplitude:e} at the grid boundary exceeds the truncation tolerance {tol:e}"
    )]
    Truncation { amplitude: f64, tol: f64 },

    #[error(
        "grid resolves oscillation rates up to {allowed:e} but {needed:e} is required; raise the node count"
    )]
    UnderResolved { needed: f64, allowed: f64 },

    #[error("series kind not computable here: {0}")]
    UnsupportedKind(String),

    #[error("invalid ensemble: {0}")]
    BadEnsemble(String),

    #[error("ensemble must contain at least one sample")]
    EmptyEnsemble,

    #[error("bandwidth must be positive and finite, got {0}")]
    BadBandwidth(f64),

    #[error("sample count must be positive")]
    EmptySampleCount,
}
