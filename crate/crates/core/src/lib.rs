//! Synthetic marker correspondence data, training objectives and the
//! alignment benchmark used to score dense marker-to-image correspondences.
//!
//! - [`geometry`]: affine / homography / thin-plate-spline maps, fundamental
//!   matrices and the symmetric epipolar distance.
//! - [`imaging`]: images, flow fields, `.flo` I/O, warping and SSIM/PSNR.
//! - [`flyingmarkers`]: the synthetic pair generator.
//! - [`losses`]: supervised L1 and epipolar losses with analytic gradients.
//! - [`matcher`]: a sparse homography baseline and a coarse-to-fine dense matcher.
//! - [`benchmark`]: EPE/PCK and the warp-alignment protocol with report output.

pub mod benchmark;
pub mod error;
pub mod flyingmarkers;
pub mod geometry;
pub mod imaging;
pub mod losses;
pub mod matcher;

pub use error::{Error, Result};
pub use geometry::{GeometricTransform, Point2};
pub use imaging::{FlowField, Image, ValidRegion};
