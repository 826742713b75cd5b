//! Planar transforms and two-view epipolar geometry.

mod affine;
pub mod epipolar;
mod homography;
mod point;
mod tps;
mod transform;

pub use affine::AffineTransform;
pub use epipolar::{
    epipolar_distance, epipolar_line, fundamental_from_pose, sed, CameraIntrinsics, EpipolarLine,
    FundamentalMatrix, RelativePose, TwoViewRig,
};
pub use homography::{homography_dlt, homography_from_four_points, Homography, MAX_CONDITION};
pub use point::Point2;
pub use tps::{tps_kernel, ThinPlateSpline, TPS_CONTROL_POINTS, TPS_IDENTITY, TPS_PARAM_COUNT};
pub use transform::{apply_transform, GeometricTransform, TransformKind, Warp};
