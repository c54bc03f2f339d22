//! Two-view radial distortion self-calibration toolkit.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the `*F64` aliases at
//! the crate root name the double-precision instantiations used by the pipelines.

// `!(a < b)` style checks are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod datagen;
pub mod degeneracy;
pub mod distortion;
pub mod imaging;
pub mod io;
pub mod ransac;
pub mod scalar;
pub mod solver;
pub mod synth;
pub mod twoview;

pub use scalar::Scalar;

pub type NormalizedPointF64 = distortion::NormalizedPoint<f64>;
pub type DistortionModelF64 = distortion::DistortionModel<f64>;
pub type CameraIntrinsicsF64 = distortion::CameraIntrinsics<f64>;
pub type CorrespondenceF64 = twoview::Correspondence<f64>;
pub type EssentialMatrixF64 = twoview::EssentialMatrix<f64>;
pub type RelativePoseF64 = twoview::RelativePose<f64>;
