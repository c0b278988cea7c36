//! Compiled companion of the book under `book/`.
//!
//! Each chapter is included as rustdoc, so every Rust listing in the book
//! builds and runs under `cargo test --doc -p lgaze-book`. One module per
//! chapter keeps doctest failures attributable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/landmarks.md")]
pub mod landmarks {}

#[doc = include_str!("../../../book/src/head-pose.md")]
pub mod head_pose {}

#[doc = include_str!("../../../book/src/normalization.md")]
pub mod normalization {}

#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
