use std::io;

use thiserror::Error;

use crate::tiling::PatchRef;
use crate::window::{PositionClass, WindowKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("{kind} window does not support the {position} position")]
    UnsupportedPosition {
        kind: WindowKind,
        position: PositionClass,
    },

    #[error("{0} has no separable 1-D factor")]
    NotSeparable(WindowKind),

    #[error("patch ({row}, {col}) does not belong to the grid", row = .0.row, col = .0.col)]
    ForeignPatch(PatchRef),

    #[error("patch ({row}, {col}) supplied more than once", row = .0.row, col = .0.col)]
    DuplicatePatch(PatchRef),

    #[error("{0} patch(es) missing from the reconstruction")]
    MissingPatches(usize),

    #[error("channel mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("non-finite value in patch ({row}, {col})", row = .0.row, col = .0.col)]
    NonFinite(PatchRef),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed image data: {0}")]
    Format(String),

    #[error("prediction failed for patch ({row}, {col}): {source}", row = .patch.row, col = .patch.col)]
    Prediction {
        patch: PatchRef,
        #[source]
        source: Box<Error>,
    },

    #[error("external predictor failed at patch index {index}: {reason}")]
    External { index: usize, reason: String },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True when the failure originates in an external predictor process.
    pub fn is_external(&self) -> bool {
        match self {
            Error::External { .. } => true,
            Error::Prediction { source, .. } => source.is_external(),
            _ => false,
        }
    }
}
