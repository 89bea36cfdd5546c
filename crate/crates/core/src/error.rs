use std::io;

use crate::tracker::RejectionStats;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid diffusion protocol: {0}")]
    Protocol(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate tensor: {0}")]
    DegenerateTensor(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("seeding failed: {0}")]
    Seeding(String),

    #[error("phantom spec rejected: {0}")]
    Spec(String),

    #[error("attempt cap of {cap} reached with {accepted} accepted streamlines ({stats})")]
    AttemptCap {
        cap: u64,
        accepted: usize,
        stats: RejectionStats,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<nifti::NiftiError> for Error {
    fn from(e: nifti::NiftiError) -> Self {
        match e {
            nifti::NiftiError::Io(io) => Error::Io(io),
            nifti::NiftiError::UnsupportedDataType(t) => {
                Error::Unsupported(format!("NIfTI datatype {t:?}"))
            }
            other => Error::Format(other.to_string()),
        }
    }
}
