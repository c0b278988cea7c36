//! Canonical 3D head geometry: static landmark positions plus a spherical
//! eyeball model that places the iris landmarks for a given gaze direction.
//!
//! Head frame convention: x toward the image-right eye, y down, z into the
//! head, millimetres. A head with identity rotation therefore faces the
//! camera, and the straight-ahead gaze direction is `(0, 0, -1)`. The origin
//! sits at the centroid of the four eye corners and the nose tip.

use crate::geometry::{Vec3, MIN_VECTOR_NORM};
use crate::landmarks::{slot, Eye, LANDMARK_COUNT};
use crate::pnp::CanonicalFaceModel;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FaceModelError {
    #[error("gaze direction is degenerate for iris placement")]
    DegenerateGaze,
}

/// Slots whose 3D position is rigid with the head (corners, eyelids, anchors).
pub const STATIC_SLOTS: [usize; 10] = [
    slot::L_CORNER_NASAL,
    slot::L_CORNER_TEMPORAL,
    slot::L_LID_UPPER,
    slot::L_LID_LOWER,
    slot::R_CORNER_NASAL,
    slot::R_CORNER_TEMPORAL,
    slot::R_LID_UPPER,
    slot::R_LID_LOWER,
    slot::NOSE_TIP,
    slot::GLABELLA,
];

/// Full head geometry used to synthesize landmark configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGeometry {
    /// Positions of [`STATIC_SLOTS`], same order, head frame (mm).
    pub static_points: [Vec3; 10],
    /// Eyeball centers, `[left, right]` (mm).
    pub eye_centers: [Vec3; 2],
    /// Eyeball radius (mm).
    pub eye_radius_mm: f64,
    /// Angular radius of the iris ring on the eyeball sphere (rad).
    pub iris_angle_rad: f64,
}

impl Default for HeadGeometry {
    fn default() -> Self {
        Self::anthropometric()
    }
}

impl HeadGeometry {
    /// Default model: interocular distance 63 mm, eyeball radius 12 mm,
    /// iris radius ~5.9 mm, nose protruding 16 mm toward the camera.
    pub fn anthropometric() -> Self {
        let half_io = 31.5;
        let corner_off = 15.0;
        let eye_radius = 12.0;
        let iris_radius = 5.9;
        let mut static_points = [
            Vec3::new(-half_io + corner_off, 0.0, 5.0), // L corner nasal
            Vec3::new(-half_io - corner_off, 0.0, 5.0), // L corner temporal
            Vec3::new(-half_io, -5.5, 3.0),             // L lid upper
            Vec3::new(-half_io, 5.5, 3.0),              // L lid lower
            Vec3::new(half_io - corner_off, 0.0, 5.0),  // R corner nasal
            Vec3::new(half_io + corner_off, 0.0, 5.0),  // R corner temporal
            Vec3::new(half_io, -5.5, 3.0),              // R lid upper
            Vec3::new(half_io, 5.5, 3.0),               // R lid lower
            Vec3::new(0.0, 38.0, -16.0),                // nose tip
            Vec3::new(0.0, -22.0, -3.0),                // glabella
        ];
        let mut eye_centers = [Vec3::new(-half_io, 0.0, 13.0), Vec3::new(half_io, 0.0, 13.0)];

        // Re-center so the origin is the centroid of the four corners and
        // the nose tip (indices 0, 1, 4, 5, 8 of STATIC_SLOTS order).
        let centroid = (static_points[0]
            + static_points[1]
            + static_points[4]
            + static_points[5]
            + static_points[8])
            / 5.0;
        for p in static_points.iter_mut() {
            *p -= centroid;
        }
        for c in eye_centers.iter_mut() {
            *c -= centroid;
        }

        Self {
            static_points,
            eye_centers,
            eye_radius_mm: eye_radius,
            iris_angle_rad: (iris_radius / eye_radius).asin(),
        }
    }

    /// Position of a static slot (panics for iris/pupil slots).
    pub fn static_point(&self, s: usize) -> Vec3 {
        let idx = STATIC_SLOTS
            .iter()
            .position(|&x| x == s)
            .expect("slot is not gaze-independent");
        self.static_points[idx]
    }

    fn eye_center(&self, eye: Eye) -> Vec3 {
        match eye {
            Eye::Left => self.eye_centers[0],
            Eye::Right => self.eye_centers[1],
        }
    }

    /// All 20 landmark positions for a gaze direction expressed in the head
    /// frame. Both eyes rotate conjugately; the pupil sits on the sphere
    /// along the gaze direction and the four iris extrema on a ring of
    /// angular radius [`Self::iris_angle_rad`] around it.
    pub fn landmark_points(&self, gaze_head: &Vec3) -> Result<[Vec3; LANDMARK_COUNT], FaceModelError> {
        let n = gaze_head.norm();
        if n <= MIN_VECTOR_NORM {
            return Err(FaceModelError::DegenerateGaze);
        }
        let dir = gaze_head / n;

        let mut out = [Vec3::zeros(); LANDMARK_COUNT];
        for (idx, &s) in STATIC_SLOTS.iter().enumerate() {
            out[s] = self.static_points[idx];
        }
        for eye in [Eye::Left, Eye::Right] {
            let center = self.eye_center(eye);
            let x_axis = Vec3::new(1.0, 0.0, 0.0);
            let horiz = x_axis - dir * dir.dot(&x_axis);
            let hn = horiz.norm();
            if hn <= DEGENERATE_TANGENT {
                return Err(FaceModelError::DegenerateGaze);
            }
            let e_h = horiz / hn;
            // Points toward the image top (negative y) for a forward gaze.
            let e_v = dir.cross(&e_h);
            let nasal = match eye {
                Eye::Left => e_h,
                Eye::Right => -e_h,
            };
            let (sin_a, cos_a) = self.iris_angle_rad.sin_cos();
            let r = self.eye_radius_mm;
            let base = eye.block().start;
            out[base + slot::L_PUPIL] = center + dir * r;
            out[base + slot::L_IRIS_NASAL] = center + (dir * cos_a + nasal * sin_a) * r;
            out[base + slot::L_IRIS_SUPERIOR] = center + (dir * cos_a + e_v * sin_a) * r;
            out[base + slot::L_IRIS_TEMPORAL] = center + (dir * cos_a - nasal * sin_a) * r;
            out[base + slot::L_IRIS_INFERIOR] = center + (dir * cos_a - e_v * sin_a) * r;
        }
        Ok(out)
    }

    /// The six-point correspondence model (corners, nose tip, glabella)
    /// used by the pose solver.
    pub fn canonical_model(&self) -> CanonicalFaceModel {
        let points = slot::POSE_SLOTS
            .iter()
            .map(|&s| (s, self.static_point(s)))
            .collect();
        CanonicalFaceModel::new(points)
    }

    /// Per-subject shape variation: isotropic Gaussian jitter on the static
    /// points and the eyeball centers.
    pub fn jittered(&self, sigma_mm: f64, rng: &mut impl Rng) -> Self {
        if sigma_mm == 0.0 {
            return self.clone();
        }
        let dist = Normal::new(0.0, sigma_mm).expect("sigma must be finite and non-negative");
        let mut out = self.clone();
        for p in out.static_points.iter_mut() {
            *p += Vec3::new(dist.sample(rng), dist.sample(rng), dist.sample(rng));
        }
        for c in out.eye_centers.iter_mut() {
            *c += Vec3::new(dist.sample(rng), dist.sample(rng), dist.sample(rng));
        }
        out
    }
}

const DEGENERATE_TANGENT: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn origin_is_corner_nose_centroid() {
        let head = HeadGeometry::anthropometric();
        let centroid = (head.static_point(slot::L_CORNER_NASAL)
            + head.static_point(slot::L_CORNER_TEMPORAL)
            + head.static_point(slot::R_CORNER_NASAL)
            + head.static_point(slot::R_CORNER_TEMPORAL)
            + head.static_point(slot::NOSE_TIP))
            / 5.0;
        assert_relative_eq!(centroid.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn straight_gaze_puts_pupil_in_front_of_eye_center() {
        let head = HeadGeometry::anthropometric();
        let pts = head.landmark_points(&Vec3::new(0.0, 0.0, -1.0)).unwrap();
        for (eye, center) in [(Eye::Left, head.eye_centers[0]), (Eye::Right, head.eye_centers[1])] {
            let pupil = pts[eye.pupil()];
            assert_relative_eq!(pupil, center + Vec3::new(0.0, 0.0, -head.eye_radius_mm), epsilon = 1e-12);
        }
    }

    #[test]
    fn iris_points_lie_on_the_eyeball_sphere() {
        let head = HeadGeometry::anthropometric();
        let gaze = Vec3::new(0.3, -0.2, -0.9);
        let pts = head.landmark_points(&gaze).unwrap();
        for eye in [Eye::Left, Eye::Right] {
            let center = match eye {
                Eye::Left => head.eye_centers[0],
                Eye::Right => head.eye_centers[1],
            };
            for s in eye.block().take(5) {
                assert_relative_eq!((pts[s] - center).norm(), head.eye_radius_mm, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn nasal_extrema_point_toward_each_other() {
        let head = HeadGeometry::anthropometric();
        let pts = head.landmark_points(&Vec3::new(0.0, 0.0, -1.0)).unwrap();
        // Left eye is at negative x; its nasal iris point leans +x.
        assert!(pts[slot::L_IRIS_NASAL].x > pts[slot::L_PUPIL].x);
        assert!(pts[slot::R_IRIS_NASAL].x < pts[slot::R_PUPIL].x);
        // Superior extrema lean up (negative y).
        assert!(pts[slot::L_IRIS_SUPERIOR].y < pts[slot::L_PUPIL].y);
    }

    #[test]
    fn jitter_is_deterministic_per_seed() {
        let head = HeadGeometry::anthropometric();
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        assert_eq!(head.jittered(2.0, &mut r1), head.jittered(2.0, &mut r2));
        let mut r3 = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        assert_ne!(head.jittered(2.0, &mut r3), head.jittered(2.0, &mut r1));
    }
}
