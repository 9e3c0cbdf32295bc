//! Simulated LiDAR: ray casting, sensor noise, scan images and the
//! precomputed scan matrix.

mod image;
mod matrix;
mod raycast;
mod scan;

pub use image::{scan_crop, scan_to_image, scan_to_map_image, ScanFrame, ScanImage};
pub use matrix::ScanMatrix;
pub(crate) use raycast::cast_unchecked;
pub use raycast::{beam_directions, raycast};
pub use scan::{corrupt_scan, corrupt_scan_with, LidarConfig, Scan, ScanNoise};
