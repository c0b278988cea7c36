//! One surface over the three regressors, plus versioned checkpoint files.
//!
//! A checkpoint is a JSON container: format tag, version, metadata (model
//! kind, training dataset, seed, feature-variant flags), and the model body.
//! MLP tensors are stored as one flat state vector in the declared graph
//! order (see [`crate::neural::mlp`]); boosted trees are stored as their
//! tree arrays. Floats round-trip bit-exactly.

use crate::data::GazeRecord;
use crate::features::{self, HeadAnchorMode};
use crate::gbt::{GbtError, GbtModel};
use crate::geometry::Vec3;
use crate::neural::{GazeMlp, HolisticMlp, MlpArch, NeuralError, SiameseMlp};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const MODEL_FORMAT: &str = "lgaze-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not an lgaze model file (format '{0}')")]
    WrongFormat(String),
    #[error("model version mismatch: file has {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint body does not match its declared kind")]
    BodyKindMismatch,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Holistic,
    Siamese,
    Gbt,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Holistic => "holistic",
            ModelKind::Siamese => "siamese",
            ModelKind::Gbt => "gbt",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "holistic" => Ok(ModelKind::Holistic),
            "siamese" => Ok(ModelKind::Siamese),
            "gbt" | "xgboost" | "trees" => Ok(ModelKind::Gbt),
            other => Err(format!("unknown model kind '{other}'")),
        }
    }
}

/// Provenance and featurization flags a trained model carries with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub train_dataset: String,
    pub seed: u64,
    pub head_anchor_mode: HeadAnchorMode,
    /// Width of the normalized image the features were scaled by.
    pub normalized_width: f64,
}

#[derive(Debug, Clone)]
pub enum ModelBody {
    Holistic(HolisticMlp),
    Siamese(SiameseMlp),
    Gbt(GbtModel),
}

/// A trained gaze regressor with its featurization contract.
#[derive(Debug, Clone)]
pub struct GazeEstimator {
    pub meta: ModelMeta,
    pub body: ModelBody,
}

impl GazeEstimator {
    pub fn kind(&self) -> ModelKind {
        self.meta.kind
    }

    /// Input feature width for this model's layout.
    pub fn feature_dim(&self) -> usize {
        match self.body {
            ModelBody::Holistic(_) | ModelBody::Gbt(_) => features::GLOBAL_DIM,
            ModelBody::Siamese(_) => features::SIAMESE_DIM,
        }
    }

    /// Featurize records into this model's input layout.
    pub fn featurize(&self, records: &[GazeRecord]) -> Array2<f64> {
        featurize_records(self.meta.kind, records, self.meta.head_anchor_mode, self.meta.normalized_width)
    }

    /// Gaze targets of a record batch as an `n x 3` matrix.
    pub fn targets(records: &[GazeRecord]) -> Array2<f64> {
        gaze_targets(records)
    }

    /// Raw (unnormalized) predictions for pre-featurized rows. Angular
    /// evaluation is scale-invariant, so no normalization happens here.
    pub fn predict_features(&self, x: ArrayView2<f64>) -> Result<Vec<Vec3>, ModelError> {
        match &self.body {
            ModelBody::Holistic(m) => {
                let out = m.forward_eval(x)?;
                Ok((0..out.nrows()).map(|i| Vec3::new(out[[i, 0]], out[[i, 1]], out[[i, 2]])).collect())
            }
            ModelBody::Siamese(m) => {
                let out = m.forward_eval(x)?;
                Ok((0..out.nrows()).map(|i| Vec3::new(out[[i, 0]], out[[i, 1]], out[[i, 2]])).collect())
            }
            ModelBody::Gbt(m) => {
                let mut out = Vec::with_capacity(x.nrows());
                let mut row = vec![0.0; x.ncols()];
                for i in 0..x.nrows() {
                    for (j, dst) in row.iter_mut().enumerate() {
                        *dst = x[[i, j]];
                    }
                    out.push(m.predict(&row)?);
                }
                Ok(out)
            }
        }
    }

    /// Inference surface: featurize records and return unit gaze vectors.
    pub fn predict_records(&self, records: &[GazeRecord]) -> Result<Vec<Vec3>, ModelError> {
        let x = self.featurize(records);
        let raw = self.predict_features(x.view())?;
        Ok(raw
            .into_iter()
            .map(|v| {
                let n = v.norm();
                if n > crate::geometry::MIN_VECTOR_NORM {
                    v / n
                } else {
                    v
                }
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let body = match &self.body {
            ModelBody::Holistic(m) => CheckpointBody::Mlp { arch: *m.arch(), state: m.flat_state() },
            ModelBody::Siamese(m) => CheckpointBody::Mlp { arch: *m.arch(), state: m.flat_state() },
            ModelBody::Gbt(m) => CheckpointBody::Gbt { model: m.clone() },
        };
        let file = CheckpointJson {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            meta: self.meta.clone(),
            body,
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointJson = serde_json::from_str(&text)?;
        if file.format != MODEL_FORMAT {
            return Err(ModelError::WrongFormat(file.format));
        }
        if file.version != MODEL_VERSION {
            return Err(ModelError::VersionMismatch { found: file.version, expected: MODEL_VERSION });
        }
        let body = match (&file.meta.kind, file.body) {
            (ModelKind::Holistic, CheckpointBody::Mlp { arch, state }) => {
                let mut m = HolisticMlp::init(&arch, 0);
                m.set_flat_state(&state)?;
                ModelBody::Holistic(m)
            }
            (ModelKind::Siamese, CheckpointBody::Mlp { arch, state }) => {
                let mut m = SiameseMlp::init(&arch, 0);
                m.set_flat_state(&state)?;
                ModelBody::Siamese(m)
            }
            (ModelKind::Gbt, CheckpointBody::Gbt { model }) => ModelBody::Gbt(model),
            _ => return Err(ModelError::BodyKindMismatch),
        };
        Ok(Self { meta: file.meta, body })
    }
}

/// Build the input feature matrix for a model kind: global features for the
/// holistic MLP and the trees, the flattened local layout for the siamese.
pub fn featurize_records(
    kind: ModelKind,
    records: &[GazeRecord],
    head_anchor_mode: HeadAnchorMode,
    width: f64,
) -> Array2<f64> {
    let dim = match kind {
        ModelKind::Holistic | ModelKind::Gbt => features::GLOBAL_DIM,
        ModelKind::Siamese => features::SIAMESE_DIM,
    };
    let mut x = Array2::<f64>::zeros((records.len(), dim));
    match kind {
        ModelKind::Holistic | ModelKind::Gbt => {
            for (i, r) in records.iter().enumerate() {
                let f = features::global_features(&r.landmarks_norm, width);
                x.row_mut(i).assign(&ndarray::ArrayView1::from(&f.0[..]));
            }
        }
        ModelKind::Siamese => {
            for (i, r) in records.iter().enumerate() {
                let f = features::local_features(&r.landmarks_norm, width, head_anchor_mode);
                x.row_mut(i).assign(&ndarray::ArrayView1::from(&f.concat()[..]));
            }
        }
    }
    x
}

/// Gaze targets of a record batch as an `n x 3` matrix.
pub fn gaze_targets(records: &[GazeRecord]) -> Array2<f64> {
    let mut t = Array2::<f64>::zeros((records.len(), 3));
    for (i, r) in records.iter().enumerate() {
        t[[i, 0]] = r.gaze_norm.x;
        t[[i, 1]] = r.gaze_norm.y;
        t[[i, 2]] = r.gaze_norm.z;
    }
    t
}

#[derive(Serialize, Deserialize)]
struct CheckpointJson {
    format: String,
    version: u32,
    meta: ModelMeta,
    body: CheckpointBody,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum CheckpointBody {
    Mlp { arch: MlpArch, state: Vec<f64> },
    Gbt { model: GbtModel },
}
