//! Synthetic landmark generator: the verification oracle for the whole
//! pipeline.
//!
//! Each sample draws a subject (a jittered copy of the anthropometric head),
//! a head pose, and a gaze direction relative to the head. Eye contours and
//! anchors ride rigidly with the head; pupil and iris landmarks sit on a
//! 12 mm eyeball sphere rotated by the gaze. The 3D points are projected
//! through a configurable physical camera, optionally perturbed with pixel
//! noise, and then pushed through the same normalization path real data
//! takes, so every emitted record is a valid training record with known
//! ground truth.

use super::normalize::{normalize_landmarks, PoseSource};
use super::{DataError, GazeRecord};
use crate::face3d::HeadGeometry;
use crate::geometry::{
    pitchyaw_to_vector, project_point, CameraIntrinsics, HeadPose, NormalizedCamera, Vec2, Vec3,
};
use crate::landmarks::{LandmarkSet, LANDMARK_COUNT};
use crate::pnp::PnpConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_subjects: usize,
    /// Head rotation ranges, degrees (yaw about y, pitch about x, roll about z).
    pub head_yaw_deg: (f64, f64),
    pub head_pitch_deg: (f64, f64),
    pub head_roll_deg: (f64, f64),
    /// Gaze ranges relative to the head, degrees.
    pub gaze_yaw_deg: (f64, f64),
    pub gaze_pitch_deg: (f64, f64),
    /// Lateral translation range: x, y drawn from +/- this value (mm).
    pub lateral_mm: f64,
    /// Depth range along the optical axis (mm).
    pub distance_mm: (f64, f64),
    /// Isotropic pixel noise sigma added to every projected landmark (px).
    pub pixel_noise: f64,
    /// Per-subject Gaussian shape jitter (mm).
    pub shape_jitter_mm: f64,
    /// Physical camera the raw landmarks are projected through.
    pub camera: CameraIntrinsics,
    pub image_width: f64,
    pub image_height: f64,
    /// How the normalization pose is obtained (matches the real pipeline).
    pub pose_source: PoseSource,
    pub norm_camera: NormalizedCamera,
    pub dataset_tag: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            n_subjects: 10,
            head_yaw_deg: (-25.0, 25.0),
            head_pitch_deg: (-20.0, 20.0),
            head_roll_deg: (-15.0, 15.0),
            gaze_yaw_deg: (-25.0, 25.0),
            gaze_pitch_deg: (-20.0, 20.0),
            lateral_mm: 80.0,
            distance_mm: (400.0, 800.0),
            pixel_noise: 0.0,
            shape_jitter_mm: 2.0,
            camera: CameraIntrinsics::new(1100.0, 1100.0, 640.0, 480.0),
            image_width: 1280.0,
            image_height: 960.0,
            pose_source: PoseSource::ProvidedAsInit,
            norm_camera: NormalizedCamera::default(),
            dataset_tag: "synth".into(),
            seed: 0,
        }
    }
}

/// Attempts per sample before giving up on the frame constraint.
const MAX_REJECTIONS: usize = 100;

/// Independent RNG stream per record index; generation order and
/// parallelization cannot change a record's content.
fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + index as u64);
    rng
}

fn subject_rng(seed: u64, subject: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1 << 32) + subject as u64);
    rng
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Head rotation from yaw/pitch/roll in the head-frame convention
/// (x image-right, y down, z into the head).
pub fn head_rotation(yaw_rad: f64, pitch_rad: f64, roll_rad: f64) -> nalgebra::Matrix3<f64> {
    // nalgebra's from_euler_angles(r, p, y) = Rz(y) * Ry(p) * Rx(r); map our
    // axes (pitch about x, yaw about y, roll about z) onto it.
    nalgebra::Rotation3::from_euler_angles(pitch_rad, yaw_rad, roll_rad).into_inner()
}

/// Project the 20 head-frame landmark points through `pose` and `camera`.
fn project_landmarks(
    points: &[Vec3; LANDMARK_COUNT],
    pose: &HeadPose,
    camera: &CameraIntrinsics,
) -> Result<LandmarkSet, DataError> {
    let mut out = [Vec2::zeros(); LANDMARK_COUNT];
    for (dst, p) in out.iter_mut().zip(points.iter()) {
        let q = pose.transform_point(p);
        *dst = project_point(camera, &q)?;
    }
    Ok(LandmarkSet::new(out))
}

/// Generate a synthetic dataset. Deterministic for a given configuration;
/// records are drawn from per-index RNG streams.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<GazeRecord>, DataError> {
    let base = HeadGeometry::anthropometric();
    let subjects: Vec<HeadGeometry> = (0..cfg.n_subjects.max(1))
        .map(|s| base.jittered(cfg.shape_jitter_mm, &mut subject_rng(cfg.seed, s)))
        .collect();
    // The solver always sees the generic canonical model, exactly like the
    // real pipeline: subject-specific shape is unknown at solve time.
    let canonical = base.canonical_model();
    let pnp_cfg = PnpConfig::default();

    let mut records = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let mut rng = record_rng(cfg.seed, i);
        let subject_idx = i % subjects.len();
        let head = &subjects[subject_idx];

        let mut accepted = None;
        for _ in 0..MAX_REJECTIONS {
            let yaw = sample_range(&mut rng, cfg.head_yaw_deg).to_radians();
            let pitch = sample_range(&mut rng, cfg.head_pitch_deg).to_radians();
            let roll = sample_range(&mut rng, cfg.head_roll_deg).to_radians();
            let rotation = head_rotation(yaw, pitch, roll);
            let translation = Vec3::new(
                sample_range(&mut rng, (-cfg.lateral_mm, cfg.lateral_mm)),
                sample_range(&mut rng, (-cfg.lateral_mm, cfg.lateral_mm)),
                sample_range(&mut rng, cfg.distance_mm),
            );
            let pose = HeadPose { rotation, translation };

            let g_yaw = sample_range(&mut rng, cfg.gaze_yaw_deg).to_radians();
            let g_pitch = sample_range(&mut rng, cfg.gaze_pitch_deg).to_radians();
            let gaze_head = pitchyaw_to_vector(g_pitch, g_yaw);
            let gaze_cam = rotation * gaze_head;

            let points = head.landmark_points(&gaze_head)?;
            let clean = match project_landmarks(&points, &pose, &cfg.camera) {
                Ok(lm) => lm,
                Err(_) => continue, // behind the camera; redraw
            };
            let noisy = if cfg.pixel_noise > 0.0 {
                let dist = Normal::new(0.0, cfg.pixel_noise).expect("finite sigma");
                clean
                    .try_map::<std::convert::Infallible>(|p| {
                        Ok(p + Vec2::new(dist.sample(&mut rng), dist.sample(&mut rng)))
                    })
                    .unwrap()
            } else {
                clean
            };
            if !noisy.within_frame(cfg.image_width, cfg.image_height) {
                continue;
            }

            let normalized = match normalize_landmarks(
                &noisy,
                &cfg.camera,
                cfg.pose_source,
                Some(&pose),
                Some(&gaze_cam),
                &cfg.norm_camera,
                &canonical,
                &pnp_cfg,
            ) {
                Ok(n) => n,
                Err(_) => continue, // degenerate draw; redraw
            };

            accepted = Some(GazeRecord {
                dataset: cfg.dataset_tag.clone(),
                subject: format!("s{subject_idx:04}"),
                frame: i as u64,
                landmarks_norm: normalized.landmarks,
                gaze_norm: normalized.gaze_norm.expect("gaze supplied"),
                landmarks_raw: Some(noisy),
                intrinsics: Some(cfg.camera),
                provided_pose: Some(pose),
                true_pose: Some(pose),
                gaze_raw: Some(gaze_cam),
            });
            break;
        }
        records.push(accepted.ok_or(DataError::RejectionBudget(MAX_REJECTIONS))?);
    }
    Ok(records)
}
