//! Camera geometry and the virtual-camera normalization math.
//!
//! The normalization maps a face observed by an arbitrary physical camera
//! into a canonical view: a virtual camera placed so that the head sits at a
//! fixed distance on the optical axis with in-plane roll removed. Landmarks
//! are moved by a plane homography acting on image rays; gaze labels are
//! rotated by the same basis change.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2D point/vector, double precision (pixels unless stated otherwise).
pub type Vec2 = Vector2<f64>;
/// 3D point/vector, double precision (mm in camera frames, unitless for gaze).
pub type Vec3 = Vector3<f64>;
/// Dense 3x3 matrix.
pub type Mat3 = Matrix3<f64>;

/// Norm below which a direction vector is treated as zero.
pub const MIN_VECTOR_NORM: f64 = 1e-12;
/// Cross-product norm below which the normalization basis is degenerate.
pub const DEGENERACY_EPS: f64 = 1e-9;
/// Homogeneous `z` magnitude below which a warped point is at infinity.
pub const HOMOGENEOUS_EPS: f64 = 1e-9;
/// Determinant magnitude below which a 3x3 matrix is not inverted.
pub const DET_EPS: f64 = 1e-12;
/// Orthonormality tolerance for validated rotations.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate pose: head x-axis is parallel to the viewing ray")]
    DegeneratePose,
    #[error("warped point is at infinity (|v_z| <= {HOMOGENEOUS_EPS:e})")]
    PointAtInfinity,
    #[error("zero-length vector where a direction is required")]
    ZeroVector,
    #[error("pitch too close to +/-90 degrees to recover yaw")]
    GimbalDegenerate,
    #[error("matrix is numerically singular (|det| <= {DET_EPS:e})")]
    NonInvertible,
    #[error("invalid camera intrinsics: focal lengths must be positive")]
    InvalidIntrinsics,
    #[error("invalid head pose: {0}")]
    InvalidPose(&'static str),
}

/// Pinhole intrinsics `K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    /// Validating constructor for values read from external data.
    pub fn checked(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics);
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Fallback for datasets that ship no calibration: focal length equal to
    /// the image width, principal point at the image center.
    pub fn from_image_size(width: f64, height: f64) -> Self {
        Self { fx: width, fy: width, cx: width / 2.0, cy: height / 2.0 }
    }

    pub fn as_matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Closed-form inverse of the upper-triangular intrinsic matrix.
    pub fn inverse_matrix(&self) -> Mat3 {
        Mat3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Virtual camera the data is normalized into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCamera {
    pub intrinsics: CameraIntrinsics,
    /// Fixed face distance `d_n` in millimetres.
    pub distance_mm: f64,
    /// Normalized image width in pixels (also the feature scale).
    pub width: f64,
    /// Normalized image height in pixels.
    pub height: f64,
}

impl Default for NormalizedCamera {
    /// 448x448 image, focal length 960 px, principal point at the center,
    /// face fixed at 300 mm.
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::new(960.0, 960.0, 224.0, 224.0),
            distance_mm: 300.0,
            width: 448.0,
            height: 448.0,
        }
    }
}

/// Rigid transform from the canonical face frame to the camera frame.
///
/// `rotation` columns are the head axes expressed in camera coordinates;
/// `translation` is in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl HeadPose {
    /// Validating constructor: `rotation` must be orthonormal with
    /// determinant +1 within [`ROTATION_TOL`], and `translation` nonzero.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let ortho = (rotation * rotation.transpose() - Mat3::identity()).norm();
        if ortho > ROTATION_TOL * 10.0 {
            return Err(GeometryError::InvalidPose("rotation is not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > ROTATION_TOL * 10.0 {
            return Err(GeometryError::InvalidPose("rotation determinant is not +1"));
        }
        if translation.norm() <= MIN_VECTOR_NORM {
            return Err(GeometryError::InvalidPose("translation is zero"));
        }
        Ok(Self { rotation, translation })
    }

    /// Transform a point from the face frame into the camera frame.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

/// Rotation `R_n` into the normalized coordinate system.
///
/// The third basis row is the unit viewing ray through the head origin, the
/// second is orthogonal to both the ray and the head x-axis (removing roll),
/// and the first completes a right-handed frame. Fails when the head x-axis
/// is parallel to the viewing ray.
pub fn build_normalization_rotation(pose: &HeadPose) -> Result<Mat3, GeometryError> {
    let t_norm = pose.translation.norm();
    if t_norm <= MIN_VECTOR_NORM {
        return Err(GeometryError::InvalidPose("translation is zero"));
    }
    let e3 = pose.translation / t_norm;
    let head_x: Vec3 = pose.rotation.column(0).into();
    let cross = e3.cross(&head_x);
    let cross_norm = cross.norm();
    if cross_norm <= DEGENERACY_EPS {
        return Err(GeometryError::DegeneratePose);
    }
    let e2 = cross / cross_norm;
    let e1 = e2.cross(&e3);
    Ok(Mat3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]))
}

/// Homography `M = K_n * S * R_n * K_c^-1` mapping raw-image pixels to
/// normalized-image pixels, where `S` rescales the face to the virtual
/// camera's fixed distance.
pub fn build_warp_matrix(
    k_c: &CameraIntrinsics,
    norm_cam: &NormalizedCamera,
    r_n: &Mat3,
    t_norm_mm: f64,
) -> Mat3 {
    let s = t_norm_mm / norm_cam.distance_mm;
    let scale = Mat3::from_diagonal(&Vec3::new(s, s, 1.0));
    norm_cam.intrinsics.as_matrix() * scale * r_n * k_c.inverse_matrix()
}

/// Apply a homography to a pixel coordinate.
pub fn warp_point(m: &Mat3, u: Vec2) -> Result<Vec2, GeometryError> {
    let v = m * Vec3::new(u.x, u.y, 1.0);
    if v.z.abs() <= HOMOGENEOUS_EPS {
        return Err(GeometryError::PointAtInfinity);
    }
    Ok(Vec2::new(v.x / v.z, v.y / v.z))
}

/// Rotate a gaze direction into the normalized frame. Norm-preserving.
pub fn rotate_gaze(r_n: &Mat3, g: &Vec3) -> Result<Vec3, GeometryError> {
    if g.norm() <= MIN_VECTOR_NORM {
        return Err(GeometryError::ZeroVector);
    }
    Ok(r_n * g)
}

/// Gaze convention: the camera looks along +z, so a gaze toward the camera
/// has negative z. `(pitch, yaw) = (0, 0)` maps to `(0, 0, -1)`; positive
/// pitch looks up (negative y, image y points down), positive yaw looks
/// toward +x.
pub fn pitchyaw_to_vector(pitch: f64, yaw: f64) -> Vec3 {
    Vec3::new(-pitch.cos() * yaw.sin(), -pitch.sin(), -pitch.cos() * yaw.cos())
}

/// Inverse of [`pitchyaw_to_vector`] for pitch in (-pi/2, pi/2).
pub fn vector_to_pitchyaw(g: &Vec3) -> Result<(f64, f64), GeometryError> {
    let n = g.norm();
    if n <= MIN_VECTOR_NORM {
        return Err(GeometryError::ZeroVector);
    }
    let u = g / n;
    if u.x.hypot(u.z) <= DEGENERACY_EPS {
        return Err(GeometryError::GimbalDegenerate);
    }
    Ok(((-u.y).asin(), (-u.x).atan2(-u.z)))
}

/// Angle between two directions in radians, in `[0, pi]`.
///
/// The cosine is clamped to `[-1, 1]` (never into the open interval), so a
/// computed cosine of one gives exactly zero; parallel inputs whose cosine
/// rounds an ulp below one land within acos(1 - 2^-52) ~ 2e-8 rad of zero.
/// Invariant to positive rescaling of either argument at the same scale.
pub fn angular_error(a: &Vec3, b: &Vec3) -> Result<f64, GeometryError> {
    let (na, nb) = (a.norm(), b.norm());
    if na <= MIN_VECTOR_NORM || nb <= MIN_VECTOR_NORM {
        return Err(GeometryError::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// [`angular_error`] reported in degrees.
pub fn angular_error_deg(a: &Vec3, b: &Vec3) -> Result<f64, GeometryError> {
    angular_error(a, b).map(f64::to_degrees)
}

/// Explicit 3x3 inverse, guarded against near-singular input.
pub fn invert(m: &Mat3) -> Result<Mat3, GeometryError> {
    if m.determinant().abs() <= DET_EPS {
        return Err(GeometryError::NonInvertible);
    }
    m.try_inverse().ok_or(GeometryError::NonInvertible)
}

/// Pinhole projection of a camera-frame point with positive depth.
pub fn project_point(k: &CameraIntrinsics, p: &Vec3) -> Result<Vec2, GeometryError> {
    if p.z <= HOMOGENEOUS_EPS {
        return Err(GeometryError::PointAtInfinity);
    }
    Ok(Vec2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}
