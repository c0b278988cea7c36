//! Head-pose estimation from 2D-3D correspondences.
//!
//! The solver minimizes the pixel reprojection error of a canonical face
//! model with damped Gauss-Newton (Levenberg-Marquardt) steps. Rotation
//! updates are local axis-angle increments composed onto a unit quaternion,
//! so the returned rotation is orthonormal by construction. Initialization
//! is a closed-form weak-perspective fit unless a pose is provided.
//!
//! Only gaze-independent landmarks (eye corners, nose tip, glabella) are
//! used as correspondences; iris points move with the eyes and would bias
//! the pose.

use crate::geometry::{project_point, CameraIntrinsics, HeadPose, Mat3, Vec2, Vec3};
use crate::landmarks::LandmarkSet;
use nalgebra::{Matrix2x3, Matrix3, Matrix6, UnitQuaternion, Vector6, SVD};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PnpError {
    #[error("need at least {MIN_CORRESPONDENCES} correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("normal equations remained singular after damping escalation")]
    SingularNormalEquations,
    #[error("degenerate correspondence configuration (rank-deficient point spread)")]
    DegenerateConfiguration,
    #[error("model point projects behind the camera")]
    PointBehindCamera,
    #[error("init strategy 'provided-pose' requires an initial pose")]
    MissingInitialPose,
    #[error("invalid canonical model: {0}")]
    InvalidModel(String),
    #[error("failed to read canonical model: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse canonical model: {0}")]
    Json(#[from] serde_json::Error),
}

/// Minimum number of 2D-3D correspondences for a pose solve.
pub const MIN_CORRESPONDENCES: usize = 4;

/// Depth (mm) below which a transformed point counts as behind the camera.
const MIN_DEPTH_MM: f64 = 1e-6;

/// Correspondence model: landmark slots paired with 3D positions (mm) in
/// the canonical head frame (origin at the eye-corner/nose-tip centroid).
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFaceModel {
    points: Vec<(usize, Vec3)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelPointJson {
    slot: usize,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
}

impl CanonicalFaceModel {
    pub fn new(points: Vec<(usize, Vec3)>) -> Self {
        Self { points }
    }

    /// The default six-point model (eye corners, nose tip, glabella) of the
    /// anthropometric head in [`crate::face3d`].
    pub fn anthropometric() -> Self {
        crate::face3d::HeadGeometry::anthropometric().canonical_model()
    }

    pub fn points(&self) -> &[(usize, Vec3)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Load from a JSON array of `{slot, x_mm, y_mm, z_mm}`.
    pub fn load_json(path: &Path) -> Result<Self, PnpError> {
        let text = std::fs::read_to_string(path)?;
        let raw: Vec<ModelPointJson> = serde_json::from_str(&text)?;
        let mut seen = [false; crate::landmarks::LANDMARK_COUNT];
        let mut points = Vec::with_capacity(raw.len());
        for p in raw {
            if p.slot >= crate::landmarks::LANDMARK_COUNT {
                return Err(PnpError::InvalidModel(format!("slot {} out of range", p.slot)));
            }
            if seen[p.slot] {
                return Err(PnpError::InvalidModel(format!("duplicate slot {}", p.slot)));
            }
            if ![p.x_mm, p.y_mm, p.z_mm].iter().all(|v| v.is_finite()) {
                return Err(PnpError::InvalidModel(format!("slot {} has non-finite coordinates", p.slot)));
            }
            seen[p.slot] = true;
            points.push((p.slot, Vec3::new(p.x_mm, p.y_mm, p.z_mm)));
        }
        if points.len() < MIN_CORRESPONDENCES {
            return Err(PnpError::TooFewPoints(points.len()));
        }
        Ok(Self { points })
    }

    pub fn save_json(&self, path: &Path) -> Result<(), PnpError> {
        let raw: Vec<ModelPointJson> = self
            .points
            .iter()
            .map(|&(slot, p)| ModelPointJson { slot, x_mm: p.x, y_mm: p.y, z_mm: p.z })
            .collect();
        std::fs::write(path, serde_json::to_string_pretty(&raw)?)?;
        Ok(())
    }
}

/// How the iterative solve is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Identity rotation at a nominal distance; cheap but crude.
    IdentityAtDistance,
    /// Closed-form scaled-orthographic fit (default).
    WeakPerspective,
    /// Use the caller-supplied pose.
    ProvidedPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PnpConfig {
    pub init_strategy: InitStrategy,
    pub max_iters: usize,
    pub lm_lambda0: f64,
    /// Convergence threshold on the RMS reprojection residual (px).
    pub tol_residual: f64,
    /// Convergence threshold on the scaled step norm (unitless).
    pub tol_step: f64,
}

impl Default for PnpConfig {
    fn default() -> Self {
        Self {
            init_strategy: InitStrategy::WeakPerspective,
            max_iters: 100,
            lm_lambda0: 1e-3,
            tol_residual: 1e-8,
            tol_step: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PnpResult {
    pub pose: HeadPose,
    /// Root-mean-square reprojection residual per point (px).
    pub rms_residual: f64,
    /// Number of attempted LM steps.
    pub iterations: usize,
    pub converged: bool,
}

/// Pinhole projection of every model point under `pose`.
pub fn project_points(
    model: &CanonicalFaceModel,
    pose: &HeadPose,
    k: &CameraIntrinsics,
) -> Result<Vec<Vec2>, PnpError> {
    model
        .points
        .iter()
        .map(|(_, p)| {
            let q = pose.transform_point(p);
            if q.z <= MIN_DEPTH_MM {
                return Err(PnpError::PointBehindCamera);
            }
            project_point(k, &q).map_err(|_| PnpError::PointBehindCamera)
        })
        .collect()
}

/// Closed-form scaled-orthographic initialization.
///
/// Centers the normalized image points and the model points, solves the
/// 2x3 least-squares map between them, orthonormalizes it into a rotation
/// by polar decomposition, and reads the depth off the scale.
pub fn weak_perspective_init(
    landmarks: &LandmarkSet,
    model: &CanonicalFaceModel,
    k: &CameraIntrinsics,
) -> Result<HeadPose, PnpError> {
    let n = model.len();
    if n < MIN_CORRESPONDENCES {
        return Err(PnpError::TooFewPoints(n));
    }

    // Normalized image coordinates (unit focal length).
    let obs: Vec<Vec2> = model
        .points
        .iter()
        .map(|&(slot, _)| {
            let u = landmarks.get(slot);
            Vec2::new((u.x - k.cx) / k.fx, (u.y - k.cy) / k.fy)
        })
        .collect();

    let obs_mean = obs.iter().sum::<Vec2>() / n as f64;
    let model_mean = model.points.iter().map(|&(_, p)| p).sum::<Vec3>() / n as f64;

    // Accumulate X * P^T (2x3) and P * P^T (3x3) over centered points.
    let mut xpt = Matrix2x3::<f64>::zeros();
    let mut ppt = Matrix3::<f64>::zeros();
    for (&(_, p), &x) in model.points.iter().zip(obs.iter()) {
        let pc = p - model_mean;
        let xc = x - obs_mean;
        xpt += Matrix2x3::from_fn(|r, c| xc[r] * pc[c]);
        ppt += pc * pc.transpose();
    }

    let svd_ppt = SVD::new(ppt, false, false);
    let smax = svd_ppt.singular_values[0];
    let smin = svd_ppt.singular_values[2];
    if !(smax > 0.0) || smin <= 1e-9 * smax {
        return Err(PnpError::DegenerateConfiguration);
    }
    let affine = xpt * ppt.try_inverse().ok_or(PnpError::DegenerateConfiguration)?;

    // Polar decomposition of the 2x3 map: rotation rows and a scale.
    let svd = SVD::new(affine, true, true);
    let u = svd.u.as_ref().ok_or(PnpError::DegenerateConfiguration)?;
    let v_t = svd.v_t.as_ref().ok_or(PnpError::DegenerateConfiguration)?;
    let rot2x3 = u * v_t;
    let scale = (svd.singular_values[0] + svd.singular_values[1]) / 2.0;
    if !(scale > 1e-12) {
        return Err(PnpError::DegenerateConfiguration);
    }

    let r1: Vec3 = rot2x3.row(0).transpose();
    let r2: Vec3 = rot2x3.row(1).transpose();
    let r3 = r1.cross(&r2);
    let rotation = Mat3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()]);
    // Snap to the nearest rotation; the cross product already guarantees
    // det = +1, this just cleans up rounding.
    let rotation = UnitQuaternion::from_matrix(&rotation).to_rotation_matrix().into_inner();

    let tz = 1.0 / scale;
    let rm = rotation * model_mean;
    let translation = Vec3::new(obs_mean.x * tz - rm.x, obs_mean.y * tz - rm.y, tz - rm.z);
    if translation.z <= MIN_DEPTH_MM {
        return Err(PnpError::DegenerateConfiguration);
    }

    HeadPose::new(rotation, translation).map_err(|_| PnpError::DegenerateConfiguration)
}

struct Correspondence {
    observed: Vec2,
    point: Vec3,
}

fn gather(landmarks: &LandmarkSet, model: &CanonicalFaceModel) -> Vec<Correspondence> {
    model
        .points
        .iter()
        .map(|&(slot, point)| Correspondence { observed: landmarks.get(slot), point })
        .collect()
}

/// Sum of squared pixel residuals, or `None` if a point falls behind the
/// camera (such a state is never accepted).
fn reprojection_cost(
    corr: &[Correspondence],
    rot: &Mat3,
    t: &Vec3,
    k: &CameraIntrinsics,
) -> Option<f64> {
    let mut cost = 0.0;
    for c in corr {
        let q = rot * c.point + t;
        if q.z <= MIN_DEPTH_MM {
            return None;
        }
        let u = Vec2::new(k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy);
        cost += (u - c.observed).norm_squared();
    }
    Some(cost)
}

/// Accumulate the Gauss-Newton normal equations at the current state.
///
/// Parameters are `[omega, dt]`: a left-composed axis-angle increment on the
/// rotation and an additive translation update.
fn normal_equations(
    corr: &[Correspondence],
    rot: &Mat3,
    t: &Vec3,
    k: &CameraIntrinsics,
) -> Option<(Matrix6<f64>, Vector6<f64>, f64)> {
    let mut h = Matrix6::<f64>::zeros();
    let mut g = Vector6::<f64>::zeros();
    let mut cost = 0.0;

    for c in corr {
        let v = rot * c.point;
        let q = v + t;
        if q.z <= MIN_DEPTH_MM {
            return None;
        }
        let inv_z = 1.0 / q.z;
        let proj = Vec2::new(k.fx * q.x * inv_z + k.cx, k.fy * q.y * inv_z + k.cy);
        let r = proj - c.observed;
        cost += r.norm_squared();

        // d(pixel)/d(camera point)
        let dpdq = Matrix2x3::new(
            k.fx * inv_z,
            0.0,
            -k.fx * q.x * inv_z * inv_z,
            0.0,
            k.fy * inv_z,
            -k.fy * q.y * inv_z * inv_z,
        );
        // d(camera point)/d(omega) = -[R p]_x,  d(camera point)/d(dt) = I
        let skew = Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0);
        let j_rot = dpdq * (-skew);
        let j_full = nalgebra::Matrix2x6::<f64>::from_fn(|row, col| {
            if col < 3 {
                j_rot[(row, col)]
            } else {
                dpdq[(row, col - 3)]
            }
        });

        h += j_full.transpose() * j_full;
        g += j_full.transpose() * nalgebra::Vector2::new(r.x, r.y);
    }
    Some((h, g, cost))
}

/// Analytic residual Jacobian (2n x 6), exposed for the finite-difference
/// oracle in tests.
pub fn residual_jacobian(
    corr_landmarks: &LandmarkSet,
    model: &CanonicalFaceModel,
    pose: &HeadPose,
    k: &CameraIntrinsics,
) -> nalgebra::DMatrix<f64> {
    let corr = gather(corr_landmarks, model);
    let mut j = nalgebra::DMatrix::zeros(2 * corr.len(), 6);
    for (i, c) in corr.iter().enumerate() {
        let v = pose.rotation * c.point;
        let q = v + pose.translation;
        let inv_z = 1.0 / q.z;
        let dpdq = Matrix2x3::new(
            k.fx * inv_z,
            0.0,
            -k.fx * q.x * inv_z * inv_z,
            0.0,
            k.fy * inv_z,
            -k.fy * q.y * inv_z * inv_z,
        );
        let skew = Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0);
        let j_rot = dpdq * (-skew);
        for row in 0..2 {
            for col in 0..3 {
                j[(2 * i + row, col)] = j_rot[(row, col)];
                j[(2 * i + row, col + 3)] = dpdq[(row, col)];
            }
        }
    }
    j
}

const LAMBDA_MAX: f64 = 1e15;
const NOMINAL_DISTANCE_MM: f64 = 600.0;

/// Estimate the head pose for a landmark set.
///
/// Minimizes the squared reprojection error over the model correspondences;
/// accepted LM steps never increase the objective. Deterministic for
/// identical inputs and configuration.
pub fn estimate_head_pose(
    landmarks: &LandmarkSet,
    model: &CanonicalFaceModel,
    k: &CameraIntrinsics,
    cfg: &PnpConfig,
    init: Option<&HeadPose>,
) -> Result<PnpResult, PnpError> {
    if model.len() < MIN_CORRESPONDENCES {
        return Err(PnpError::TooFewPoints(model.len()));
    }
    let corr = gather(landmarks, model);
    let n = corr.len() as f64;

    let init_pose = match cfg.init_strategy {
        InitStrategy::ProvidedPose => *init.ok_or(PnpError::MissingInitialPose)?,
        InitStrategy::WeakPerspective => weak_perspective_init(landmarks, model, k)?,
        InitStrategy::IdentityAtDistance => HeadPose {
            rotation: Mat3::identity(),
            translation: Vec3::new(0.0, 0.0, NOMINAL_DISTANCE_MM),
        },
    };

    let mut quat = UnitQuaternion::from_matrix(&init_pose.rotation);
    let mut t = init_pose.translation;
    let mut lambda = cfg.lm_lambda0;
    let mut iterations = 0;
    let mut converged = false;

    let mut cost = reprojection_cost(&corr, &quat.to_rotation_matrix().into_inner(), &t, k)
        .ok_or(PnpError::PointBehindCamera)?;

    'outer: while iterations < cfg.max_iters {
        let rot = quat.to_rotation_matrix().into_inner();
        if (cost / n).sqrt() < cfg.tol_residual {
            converged = true;
            break;
        }
        let (h, g, _) = match normal_equations(&corr, &rot, &t, k) {
            Some(v) => v,
            None => return Err(PnpError::PointBehindCamera),
        };

        loop {
            // Marquardt scaling: damp with the diagonal of H so rotation
            // (rad) and translation (mm) blocks are treated comparably.
            let mut damped = h;
            for i in 0..6 {
                damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
            }
            let step = match damped.lu().solve(&(-g)) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        return Err(PnpError::SingularNormalEquations);
                    }
                    continue;
                }
            };
            iterations += 1;

            let omega = Vec3::new(step[0], step[1], step[2]);
            let dt = Vec3::new(step[3], step[4], step[5]);
            let scaled_step = (omega.norm_squared()
                + (dt.norm() / (1.0 + t.norm())).powi(2))
            .sqrt();

            let cand_quat = UnitQuaternion::from_scaled_axis(omega) * quat;
            let cand_t = t + dt;
            let cand_cost =
                reprojection_cost(&corr, &cand_quat.to_rotation_matrix().into_inner(), &cand_t, k);

            match cand_cost {
                Some(c) if c <= cost => {
                    debug_assert!(c <= cost, "accepted LM step increased the objective");
                    quat = cand_quat;
                    t = cand_t;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    if scaled_step < cfg.tol_step {
                        converged = true;
                        break 'outer;
                    }
                    break; // recompute normal equations at the new state
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        // Damping exhausted without an acceptable step: the
                        // state is as converged as it will get.
                        converged = scaled_step < cfg.tol_step;
                        break 'outer;
                    }
                    if iterations >= cfg.max_iters {
                        break 'outer;
                    }
                }
            }
        }
    }

    let rotation = quat.to_rotation_matrix().into_inner();
    let pose = HeadPose { rotation, translation: t };
    let rms = (cost / n).sqrt();
    if !converged {
        converged = rms < cfg.tol_residual;
    }
    Ok(PnpResult { pose, rms_residual: rms, iterations, converged })
}
