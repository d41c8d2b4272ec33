use thiserror::Error;

use crate::dfpg::CellMap;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no trajectory")]
    NoTrajectory,
    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },
    #[error("no free space")]
    NoFreeSpace,
    #[error("disconnected: no path from {from:?} to {to:?}")]
    Disconnected {
        from: (usize, usize),
        to: (usize, usize),
    },
    #[error("non-simple boundary: {0}")]
    NonSimpleBoundary(String),
    #[error("no interior predicted")]
    NoInterior {
        /// Per-cell interior probability from the footprint network, when available.
        probability: Option<Box<CellMap>>,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid floor plan grid: {0}")]
    InvalidDfpg(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad input: {0}")]
    Parse(String),
    #[error(transparent)]
    Nn(#[from] walkplan_nn::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
