//! Geometric compositing of a posed parametric human body into an RGB-D scene.
//!
//! The crate covers the deterministic half of a human-insertion pipeline:
//! skinning a parametric body, rasterizing it through a pinhole camera,
//! dense body-to-body displacement fields, support-plane estimation,
//! collision-aware placement, depth-ordered compositing, perturbation data
//! for appearance harmonization, and image similarity metrics.
//!
//! Data-parallel inner loops (raster rows, RANSAC hypotheses, collision
//! queries, SSIM rows) run on rayon when the `parallel` feature is enabled.
//! Every such entry point takes an [`Exec`] so the serial path stays
//! available at runtime and produces bit-identical output.

// `!(x > 0.0)` is how NaN is rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod body_model;
pub mod camera;
pub mod compositor;
pub mod correspondence;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod geom;
pub mod ground_plane;
pub mod metrics;
pub mod perturb;
pub mod placement;
pub mod raster;
pub mod rng;
pub mod scene_io;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geom::{Mat3, Vec3};
