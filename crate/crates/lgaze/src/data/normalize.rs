//! The normalization driver: head pose (solved or provided) -> basis change
//! -> landmark warp -> gaze rotation.

use super::{DataError, GazeRecord, RawRecord};
use crate::geometry::{
    build_normalization_rotation, build_warp_matrix, rotate_gaze, CameraIntrinsics, HeadPose, Mat3,
    NormalizedCamera, Vec3,
};
use crate::landmarks::{warp_landmarks, LandmarkSet};
use crate::pnp::{estimate_head_pose, CanonicalFaceModel, InitStrategy, PnpConfig, PnpResult};
use serde::{Deserialize, Serialize};

/// Where the head pose for normalization comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseSource {
    /// Solve from scratch (weak-perspective init unless configured otherwise).
    Solve,
    /// Trust the dataset-provided pose; no solve.
    Provided,
    /// Refine the provided pose by reprojection; the refined pose drives the
    /// warp so it stays aligned with the detected landmarks.
    ProvidedAsInit,
}

#[derive(Debug, Clone)]
pub struct NormalizationResult {
    pub landmarks: LandmarkSet,
    /// Basis change into the normalized frame (`R_n`).
    pub rotation: Mat3,
    /// Full pixel homography (`M`).
    pub warp: Mat3,
    /// The pose the warp was built from.
    pub pose: HeadPose,
    /// Present when a solve ran.
    pub pnp: Option<PnpResult>,
    /// Rotated unit gaze, when a raw gaze was supplied.
    pub gaze_norm: Option<Vec3>,
}

/// Normalize one landmark set (and optionally its gaze label) into the
/// virtual-camera frame.
pub fn normalize_landmarks(
    raw: &LandmarkSet,
    k_c: &CameraIntrinsics,
    source: PoseSource,
    provided: Option<&HeadPose>,
    gaze_raw: Option<&Vec3>,
    norm_cam: &NormalizedCamera,
    model: &CanonicalFaceModel,
    pnp_cfg: &PnpConfig,
) -> Result<NormalizationResult, DataError> {
    let (pose, pnp) = match source {
        PoseSource::Provided => {
            let pose = provided.ok_or(DataError::MissingField("provided_pose"))?;
            (*pose, None)
        }
        PoseSource::Solve => {
            let result = estimate_head_pose(raw, model, k_c, pnp_cfg, provided)?;
            (result.pose, Some(result))
        }
        PoseSource::ProvidedAsInit => {
            let init = provided.ok_or(DataError::MissingField("provided_pose"))?;
            let cfg = PnpConfig { init_strategy: InitStrategy::ProvidedPose, ..*pnp_cfg };
            let result = estimate_head_pose(raw, model, k_c, &cfg, Some(init))?;
            (result.pose, Some(result))
        }
    };

    let rotation = build_normalization_rotation(&pose)?;
    let warp = build_warp_matrix(k_c, norm_cam, &rotation, pose.translation.norm());
    let landmarks = warp_landmarks(&warp, raw)?;
    let gaze_norm = match gaze_raw {
        Some(g) => {
            let rotated = rotate_gaze(&rotation, g)?;
            Some(rotated / rotated.norm())
        }
        None => None,
    };

    Ok(NormalizationResult { landmarks, rotation, warp, pose, pnp, gaze_norm })
}

/// Normalize a raw record into a training record.
pub fn normalize_record(
    raw: &RawRecord,
    source: PoseSource,
    norm_cam: &NormalizedCamera,
    model: &CanonicalFaceModel,
    pnp_cfg: &PnpConfig,
) -> Result<GazeRecord, DataError> {
    let k = raw.effective_intrinsics()?;
    let result = normalize_landmarks(
        &raw.landmarks_raw,
        &k,
        source,
        raw.provided_pose.as_ref(),
        Some(&raw.gaze_raw),
        norm_cam,
        model,
        pnp_cfg,
    )?;
    Ok(GazeRecord {
        dataset: raw.dataset.clone(),
        subject: raw.subject.clone(),
        frame: raw.frame,
        landmarks_norm: result.landmarks,
        gaze_norm: result.gaze_norm.expect("gaze supplied"),
        landmarks_raw: Some(raw.landmarks_raw.clone()),
        intrinsics: Some(k),
        provided_pose: raw.provided_pose,
        true_pose: None,
        gaze_raw: Some(raw.gaze_raw),
    })
}
