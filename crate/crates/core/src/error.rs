use thiserror::Error;

use crate::sampler::CellCoord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hall saturation: space a.s. covered (radius law has infinite d-th moment)")]
    HallSaturation,

    #[error("query radius {radius} exceeds the sampled window radius {window}")]
    OutsideWindow { radius: f64, window: f64 },

    #[error("unknown cell coordinate {0}")]
    UnknownCoordinate(CellCoord),

    #[error("configuration carries no cell layout (was it produced by sample_cells?)")]
    NoCellLayout,

    #[error("cell layout mismatch: config has L={config_l}, r={config_r}; call has L={call_l}, r={call_r}")]
    LayoutMismatch { config_l: f64, config_r: f64, call_l: f64, call_r: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("bracket does not straddle the target: p(lo={lo})={p_lo:.4}, p(hi={hi})={p_hi:.4}")]
    BracketNotStraddling { lo: f64, hi: f64, p_lo: f64, p_hi: f64 },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant breached: {0}")]
    InvariantBreach(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
