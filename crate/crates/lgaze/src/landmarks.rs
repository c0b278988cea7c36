//! The 20-landmark layout and its frozen slot table.
//!
//! Every pipeline stage addresses landmarks by *slot*, a fixed semantic
//! position in a 20-element array. "Left" and "right" are image sides: the
//! left eye is the one that appears on the image-left. Per eye there are a
//! pupil center, four iris extrema, two corners and two eyelid extrema; two
//! head anchors (nose tip and glabella) complete the set.
//!
//! | Slot | Meaning            | Dense-mesh index |
//! |------|--------------------|------------------|
//! | 0    | L pupil center     | 468 |
//! | 1    | L iris nasal       | 469 |
//! | 2    | L iris superior    | 470 |
//! | 3    | L iris temporal    | 471 |
//! | 4    | L iris inferior    | 472 |
//! | 5    | L corner nasal     | 133 |
//! | 6    | L corner temporal  | 33  |
//! | 7    | L eyelid upper     | 159 |
//! | 8    | L eyelid lower     | 145 |
//! | 9    | R pupil center     | 473 |
//! | 10   | R iris nasal       | 476 |
//! | 11   | R iris superior    | 475 |
//! | 12   | R iris temporal    | 474 |
//! | 13   | R iris inferior    | 477 |
//! | 14   | R corner nasal     | 362 |
//! | 15   | R corner temporal  | 263 |
//! | 16   | R eyelid upper     | 386 |
//! | 17   | R eyelid lower     | 374 |
//! | 18   | nose tip           | 1   |
//! | 19   | glabella           | 9   |
//!
//! The two eye blocks use the same role order, so slot `i` and slot `i + 9`
//! are anatomical mirrors of each other.

use crate::geometry::Vec2;
use thiserror::Error;

/// Number of landmarks in the fixed layout.
pub const LANDMARK_COUNT: usize = 20;

/// Landmarks per eye (pupil + 4 iris extrema + 2 corners + 2 eyelids).
pub const EYE_LANDMARK_COUNT: usize = 9;

/// Dense-mesh source index for each slot (import adapters only; the rest of
/// the pipeline never sees mesh indices).
pub const MESH_INDEX: [u32; LANDMARK_COUNT] = [
    468, 469, 470, 471, 472, 133, 33, 159, 145, // left eye
    473, 476, 475, 474, 477, 362, 263, 386, 374, // right eye
    1, 9, // anchors
];

/// Named slot indices. Kept as plain `usize` so they index arrays directly.
pub mod slot {
    pub const L_PUPIL: usize = 0;
    pub const L_IRIS_NASAL: usize = 1;
    pub const L_IRIS_SUPERIOR: usize = 2;
    pub const L_IRIS_TEMPORAL: usize = 3;
    pub const L_IRIS_INFERIOR: usize = 4;
    pub const L_CORNER_NASAL: usize = 5;
    pub const L_CORNER_TEMPORAL: usize = 6;
    pub const L_LID_UPPER: usize = 7;
    pub const L_LID_LOWER: usize = 8;
    pub const R_PUPIL: usize = 9;
    pub const R_IRIS_NASAL: usize = 10;
    pub const R_IRIS_SUPERIOR: usize = 11;
    pub const R_IRIS_TEMPORAL: usize = 12;
    pub const R_IRIS_INFERIOR: usize = 13;
    pub const R_CORNER_NASAL: usize = 14;
    pub const R_CORNER_TEMPORAL: usize = 15;
    pub const R_LID_UPPER: usize = 16;
    pub const R_LID_LOWER: usize = 17;
    pub const NOSE_TIP: usize = 18;
    pub const GLABELLA: usize = 19;

    /// The four eye corners, ordered L nasal, L temporal, R nasal, R temporal.
    pub const EYE_CORNERS: [usize; 4] = [L_CORNER_NASAL, L_CORNER_TEMPORAL, R_CORNER_NASAL, R_CORNER_TEMPORAL];
    /// Nose tip and glabella.
    pub const HEAD_ANCHORS: [usize; 2] = [NOSE_TIP, GLABELLA];
    /// Stable slots used for head-pose correspondences (gaze-independent).
    pub const POSE_SLOTS: [usize; 6] =
        [L_CORNER_NASAL, L_CORNER_TEMPORAL, R_CORNER_NASAL, R_CORNER_TEMPORAL, NOSE_TIP, GLABELLA];
}

/// Image side of an eye.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    /// Slot range of this eye's 9-landmark block.
    pub fn block(self) -> std::ops::Range<usize> {
        match self {
            Eye::Left => 0..EYE_LANDMARK_COUNT,
            Eye::Right => EYE_LANDMARK_COUNT..2 * EYE_LANDMARK_COUNT,
        }
    }

    pub fn pupil(self) -> usize {
        self.block().start + slot::L_PUPIL
    }

    /// (nasal, temporal) corner slots.
    pub fn corners(self) -> (usize, usize) {
        let base = self.block().start;
        (base + slot::L_CORNER_NASAL, base + slot::L_CORNER_TEMPORAL)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LandmarkError {
    #[error("expected {LANDMARK_COUNT} landmarks, got {0}")]
    WrongCount(usize),
    #[error("landmark {0} has a non-finite coordinate")]
    NonFinite(usize),
}

/// Ordered 20-point landmark set in either the raw or the normalized image
/// frame (pixels). The semantic layout is the frozen slot table above.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: [Vec2; LANDMARK_COUNT],
}

impl LandmarkSet {
    pub fn new(points: [Vec2; LANDMARK_COUNT]) -> Self {
        Self { points }
    }

    /// Validating constructor for external data: checks count and finiteness.
    pub fn from_slice(points: &[Vec2]) -> Result<Self, LandmarkError> {
        if points.len() != LANDMARK_COUNT {
            return Err(LandmarkError::WrongCount(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(LandmarkError::NonFinite(i));
            }
        }
        let mut arr = [Vec2::zeros(); LANDMARK_COUNT];
        arr.copy_from_slice(points);
        Ok(Self { points: arr })
    }

    pub fn get(&self, slot: usize) -> Vec2 {
        self.points[slot]
    }

    pub fn points(&self) -> &[Vec2; LANDMARK_COUNT] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec2> {
        self.points.iter()
    }

    /// Apply `f` to every point, preserving slot order.
    pub fn try_map<E>(&self, mut f: impl FnMut(Vec2) -> Result<Vec2, E>) -> Result<Self, E> {
        let mut out = [Vec2::zeros(); LANDMARK_COUNT];
        for (dst, src) in out.iter_mut().zip(self.points.iter()) {
            *dst = f(*src)?;
        }
        Ok(Self { points: out })
    }

    /// Exchange the left and right eye blocks (slot role order is shared, so
    /// this is an anatomically consistent mirror of the block contents).
    pub fn with_swapped_eye_blocks(&self) -> Self {
        let mut points = self.points;
        for i in 0..EYE_LANDMARK_COUNT {
            points.swap(i, i + EYE_LANDMARK_COUNT);
        }
        Self { points }
    }

    /// True when every point lies inside `[0, width] x [0, height]`.
    pub fn within_frame(&self, width: f64, height: f64) -> bool {
        self.points
            .iter()
            .all(|p| p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height)
    }
}

/// Warp every landmark by a homography, preserving slot order.
pub fn warp_landmarks(
    m: &crate::geometry::Mat3,
    raw: &LandmarkSet,
) -> Result<LandmarkSet, crate::geometry::GeometryError> {
    raw.try_map(|p| crate::geometry::warp_point(m, p))
}
