//! Gaze estimation from sparse facial landmarks.
//!
//! The pipeline normalizes 2D landmarks and gaze labels into a virtual-camera
//! frame via PnP head-pose estimation, builds geometric feature vectors, and
//! regresses 3D gaze with residual MLPs or gradient-boosted trees. A
//! synthetic face/eyeball generator provides a geometric oracle for
//! verification at desk scale.

pub mod data;
pub mod evaluation;
pub mod face3d;
pub mod features;
pub mod gbt;
pub mod geometry;
pub mod landmarks;
pub mod model;
pub mod neural;
pub mod pnp;
pub mod training;
