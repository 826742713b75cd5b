//! Images, flow fields, warping and image-similarity metrics.

mod flow;
mod image;
pub mod metrics;
mod sample;
mod texture;
mod warp;

pub use self::image::Image;
pub use flow::{write_pfm, FlowField, FLO_MAGIC, INVALID_FLOW, INVALID_THRESHOLD};
pub use metrics::{psnr_value, ssim_value, ssim_with, SsimConfig, PSNR_CAP_DB};
pub use sample::bilinear_sample;
pub use texture::procedural_texture;
pub use warp::{warp_by_flow, warp_by_transform, ValidRegion};
