//! Dataset records, ingestion, splits, normalization drivers, and the
//! synthetic face/eyeball generator used as the verification oracle.

pub mod normalize;
pub mod record;
pub mod split;
pub mod synth;

pub use normalize::{normalize_landmarks, normalize_record, NormalizationResult, PoseSource};
pub use record::{load_raw_records, load_records, save_raw_records, save_records, GazeRecord, RawRecord};
pub use split::{split, DatasetSplit, SplitSpec};
pub use synth::{generate_synthetic, SynthConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("schema version mismatch: file declares {found}, this build reads {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("split produced an empty {0} set")]
    EmptySplitProduced(&'static str),
    #[error("subject id '{0}' has no numeric part; subject-range splits need numeric ids")]
    NonNumericSubject(String),
    #[error("record is missing the '{0}' field required by this operation")]
    MissingField(&'static str),
    #[error("head pose estimation failed: {0}")]
    Pnp(#[from] crate::pnp::PnpError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("synthetic sample rejected {0} times in a row; widen the ranges or the image frame")]
    RejectionBudget(usize),
    #[error(transparent)]
    Face(#[from] crate::face3d::FaceModelError),
}
