//! Adaptive-zoom stereo instance geometry.
//!
//! Camera models and calibration files, per-instance zooming of stereo
//! regions, part-location encoding, point-cloud reconstruction, pose fitting,
//! scoring and KITTI-style evaluation, plus a synthetic renderer for testing.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod error;
pub mod eval;
pub mod io;
pub mod parts;
pub mod pointcloud;
pub mod pipeline;
pub mod pose;
pub mod raster;
pub mod score;
pub mod synthetic;
pub mod zoom;

pub use error::{Error, Result};
