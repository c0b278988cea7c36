//! Regression features built from normalized landmarks.
//!
//! All features are centered pixel coordinates scaled by the normalized
//! image width, which makes them unitless and invariant to rigid image
//! translation. The global vector feeds the holistic MLP and the boosted
//! trees; the local vectors feed the siamese MLP's eye branches and fusion
//! stage.

use crate::geometry::Vec2;
use crate::landmarks::{slot, Eye, LandmarkSet, EYE_LANDMARK_COUNT, LANDMARK_COUNT};
use serde::{Deserialize, Serialize};

/// Length of the global feature vector (20 landmarks x 2).
pub const GLOBAL_DIM: usize = 2 * LANDMARK_COUNT;
/// Length of one per-eye feature vector (9 landmarks x 2).
pub const EYE_DIM: usize = 2 * EYE_LANDMARK_COUNT;
/// Length of the head-anchor feature vector (2 anchors x 2).
pub const HEAD_DIM: usize = 4;
/// Length of the flattened siamese input: `[f_L, f_R, delta_c, f_H]`.
pub const SIAMESE_DIM: usize = 2 * EYE_DIM + 2 + HEAD_DIM;

/// How the head-anchor coordinates are represented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadAnchorMode {
    /// Anchors centered on the inter-eye midpoint and scaled by the width;
    /// keeps every feature translation-invariant.
    #[default]
    CenteredInterEye,
    /// Raw anchor coordinates divided by the width (reproduction variant).
    RawOverWidth,
}

/// Whole-face feature vector: every landmark centered on the eye-corner
/// centroid and scaled by the image width, in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFeatures(pub [f64; GLOBAL_DIM]);

/// Per-eye feature vectors plus the binocular geometry terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFeatures {
    /// Left-eye landmarks centered on the left corner midpoint, slot order.
    pub left: [f64; EYE_DIM],
    /// Right-eye landmarks centered on the right corner midpoint, slot order.
    pub right: [f64; EYE_DIM],
    /// `(c_R - c_L) / w`.
    pub delta_c: [f64; 2],
    /// Head anchors, representation per [`HeadAnchorMode`].
    pub head: [f64; HEAD_DIM],
}

/// Midpoint of one eye's two corner slots.
pub fn eye_centroid(lm: &LandmarkSet, eye: Eye) -> Vec2 {
    let (nasal, temporal) = eye.corners();
    (lm.get(nasal) + lm.get(temporal)) / 2.0
}

/// Midpoint of all four eye corners: the global reference centroid.
pub fn corners_centroid(lm: &LandmarkSet) -> Vec2 {
    let sum: Vec2 = slot::EYE_CORNERS.iter().map(|&s| lm.get(s)).sum();
    sum / 4.0
}

/// Global features: `(u_i - c_E) / w` for every slot.
pub fn global_features(lm: &LandmarkSet, width: f64) -> GlobalFeatures {
    let c = corners_centroid(lm);
    let mut out = [0.0; GLOBAL_DIM];
    for (i, p) in lm.iter().enumerate() {
        out[2 * i] = (p.x - c.x) / width;
        out[2 * i + 1] = (p.y - c.y) / width;
    }
    GlobalFeatures(out)
}

/// Local features: per-eye blocks centered on their own corner midpoints,
/// the inter-eye offset, and the head anchors.
pub fn local_features(lm: &LandmarkSet, width: f64, mode: HeadAnchorMode) -> LocalFeatures {
    let c_l = eye_centroid(lm, Eye::Left);
    let c_r = eye_centroid(lm, Eye::Right);

    let mut left = [0.0; EYE_DIM];
    let mut right = [0.0; EYE_DIM];
    for i in 0..EYE_LANDMARK_COUNT {
        let p = lm.get(Eye::Left.block().start + i);
        left[2 * i] = (p.x - c_l.x) / width;
        left[2 * i + 1] = (p.y - c_l.y) / width;
        let p = lm.get(Eye::Right.block().start + i);
        right[2 * i] = (p.x - c_r.x) / width;
        right[2 * i + 1] = (p.y - c_r.y) / width;
    }

    let delta_c = [(c_r.x - c_l.x) / width, (c_r.y - c_l.y) / width];

    let anchor_ref = match mode {
        HeadAnchorMode::CenteredInterEye => (c_l + c_r) / 2.0,
        HeadAnchorMode::RawOverWidth => Vec2::zeros(),
    };
    let mut head = [0.0; HEAD_DIM];
    for (i, &s) in slot::HEAD_ANCHORS.iter().enumerate() {
        let p = lm.get(s);
        head[2 * i] = (p.x - anchor_ref.x) / width;
        head[2 * i + 1] = (p.y - anchor_ref.y) / width;
    }

    LocalFeatures { left, right, delta_c, head }
}

impl LocalFeatures {
    /// Flatten to the canonical siamese input layout
    /// `[f_L(18), f_R(18), delta_c(2), f_H(4)]`.
    pub fn concat(&self) -> [f64; SIAMESE_DIM] {
        let mut out = [0.0; SIAMESE_DIM];
        out[..EYE_DIM].copy_from_slice(&self.left);
        out[EYE_DIM..2 * EYE_DIM].copy_from_slice(&self.right);
        out[2 * EYE_DIM..2 * EYE_DIM + 2].copy_from_slice(&self.delta_c);
        out[2 * EYE_DIM + 2..].copy_from_slice(&self.head);
        out
    }

    /// Inverse of [`Self::concat`].
    pub fn from_concat(v: &[f64; SIAMESE_DIM]) -> Self {
        let mut f = LocalFeatures {
            left: [0.0; EYE_DIM],
            right: [0.0; EYE_DIM],
            delta_c: [0.0; 2],
            head: [0.0; HEAD_DIM],
        };
        f.left.copy_from_slice(&v[..EYE_DIM]);
        f.right.copy_from_slice(&v[EYE_DIM..2 * EYE_DIM]);
        f.delta_c.copy_from_slice(&v[2 * EYE_DIM..2 * EYE_DIM + 2]);
        f.head.copy_from_slice(&v[2 * EYE_DIM + 2..]);
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const W: f64 = 448.0;

    fn uniform_set(p: Vec2) -> LandmarkSet {
        LandmarkSet::new([p; LANDMARK_COUNT])
    }

    fn sample_set() -> LandmarkSet {
        let mut pts = [Vec2::zeros(); LANDMARK_COUNT];
        for (i, p) in pts.iter_mut().enumerate() {
            let a = i as f64;
            *p = Vec2::new(150.0 + 11.0 * a + (a * 0.7).sin() * 5.0, 200.0 + 7.0 * a + (a * 1.3).cos() * 4.0);
        }
        LandmarkSet::new(pts)
    }

    fn translated(lm: &LandmarkSet, d: Vec2) -> LandmarkSet {
        lm.try_map::<()>(|p| Ok(p + d)).unwrap()
    }

    #[test]
    fn coincident_points_give_zero_features() {
        let lm = uniform_set(Vec2::new(224.0, 224.0));
        let g = global_features(&lm, W);
        assert!(g.0.iter().all(|&v| v == 0.0));
        let l = local_features(&lm, W, HeadAnchorMode::CenteredInterEye);
        assert!(l.left.iter().all(|&v| v == 0.0));
        assert!(l.right.iter().all(|&v| v == 0.0));
        assert_eq!(l.delta_c, [0.0, 0.0]);
        assert!(l.head.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_invariance() {
        let lm = sample_set();
        let shifted = translated(&lm, Vec2::new(17.0, 17.0));
        let (a, b) = (global_features(&lm, W), global_features(&shifted, W));
        for (x, y) in a.0.iter().zip(b.0.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        let (a, b) = (
            local_features(&lm, W, HeadAnchorMode::CenteredInterEye),
            local_features(&shifted, W, HeadAnchorMode::CenteredInterEye),
        );
        for (x, y) in a.concat().iter().zip(b.concat().iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        // The raw variant is deliberately not translation invariant.
        let (a, b) = (
            local_features(&lm, W, HeadAnchorMode::RawOverWidth),
            local_features(&shifted, W, HeadAnchorMode::RawOverWidth),
        );
        assert!((a.head[0] - b.head[0]).abs() > 1e-6);
    }

    #[test]
    fn centroid_hand_computation() {
        let mut pts = [Vec2::new(300.0, 300.0); LANDMARK_COUNT];
        pts[slot::L_CORNER_NASAL] = Vec2::new(210.0, 200.0);
        pts[slot::L_CORNER_TEMPORAL] = Vec2::new(200.0, 200.0);
        pts[slot::R_CORNER_NASAL] = Vec2::new(230.0, 200.0);
        pts[slot::R_CORNER_TEMPORAL] = Vec2::new(240.0, 200.0);
        let lm = LandmarkSet::new(pts);
        let c = corners_centroid(&lm);
        assert_relative_eq!(c, Vec2::new(220.0, 200.0));

        let g = global_features(&lm, W);
        // Slot 5 (L corner nasal): (210 - 220)/448, (200 - 200)/448.
        assert_relative_eq!(g.0[2 * slot::L_CORNER_NASAL], -10.0 / 448.0);
        assert_relative_eq!(g.0[2 * slot::L_CORNER_NASAL + 1], 0.0);
        // Slot 0 (L pupil at the filler position): (300 - 220)/448, 100/448.
        assert_relative_eq!(g.0[0], 80.0 / 448.0);
        assert_relative_eq!(g.0[1], 100.0 / 448.0);
    }

    #[test]
    fn delta_c_arithmetic() {
        let mut pts = [Vec2::new(0.0, 0.0); LANDMARK_COUNT];
        pts[slot::L_CORNER_NASAL] = Vec2::new(190.0, 224.0);
        pts[slot::L_CORNER_TEMPORAL] = Vec2::new(170.0, 224.0);
        pts[slot::R_CORNER_NASAL] = Vec2::new(270.0, 224.0);
        pts[slot::R_CORNER_TEMPORAL] = Vec2::new(290.0, 224.0);
        let lm = LandmarkSet::new(pts);
        let f = local_features(&lm, W, HeadAnchorMode::CenteredInterEye);
        assert_relative_eq!(f.delta_c[0], 100.0 / 448.0, epsilon = 1e-15);
        assert_relative_eq!(f.delta_c[1], 0.0);
    }

    #[test]
    fn local_and_global_reconstructions_agree() {
        let lm = sample_set();
        let g = global_features(&lm, W);
        let l = local_features(&lm, W, HeadAnchorMode::CenteredInterEye);
        let c_e = corners_centroid(&lm);
        let c_l = eye_centroid(&lm, Eye::Left);
        let c_r = eye_centroid(&lm, Eye::Right);
        for i in 0..EYE_LANDMARK_COUNT {
            let from_global = Vec2::new(g.0[2 * i] * W + c_e.x, g.0[2 * i + 1] * W + c_e.y);
            let from_local = Vec2::new(l.left[2 * i] * W + c_l.x, l.left[2 * i + 1] * W + c_l.y);
            assert_relative_eq!(from_global, from_local, epsilon = 1e-12);
            let j = i + EYE_LANDMARK_COUNT;
            let from_global = Vec2::new(g.0[2 * j] * W + c_e.x, g.0[2 * j + 1] * W + c_e.y);
            let from_local = Vec2::new(l.right[2 * i] * W + c_r.x, l.right[2 * i + 1] * W + c_r.y);
            assert_relative_eq!(from_global, from_local, epsilon = 1e-12);
        }
    }

    #[test]
    fn eye_swap_mirrors_locals() {
        let lm = sample_set();
        let swapped = lm.with_swapped_eye_blocks();
        let a = local_features(&lm, W, HeadAnchorMode::CenteredInterEye);
        let b = local_features(&swapped, W, HeadAnchorMode::CenteredInterEye);
        assert_eq!(a.left, b.right);
        assert_eq!(a.right, b.left);
        assert_relative_eq!(a.delta_c[0], -b.delta_c[0]);
        assert_relative_eq!(a.delta_c[1], -b.delta_c[1]);
        assert_eq!(a.head, b.head);
    }

    #[test]
    fn concat_round_trip() {
        let lm = sample_set();
        let l = local_features(&lm, W, HeadAnchorMode::CenteredInterEye);
        assert_eq!(LocalFeatures::from_concat(&l.concat()), l);
    }
}
