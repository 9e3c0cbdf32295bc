//! Beam endpoint rasters.

use serde::{Deserialize, Serialize};

use super::scan::Scan;
use crate::mapgen::GridGeometry;
use crate::num::Scalar;
use crate::pose::ContinuousPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanFrame {
    /// Robot at the image center, heading along `+x`.
    RobotCentric,
    /// Endpoints placed in map coordinates as if taken from a given pose.
    MapAt { row: usize, col: usize, heading: usize },
}

/// Binary image with `1` at every finite beam endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanImage {
    pub raster: Vec<u8>,
    pub height: usize,
    pub width: usize,
    pub frame: ScanFrame,
}

impl ScanImage {
    pub fn count(&self) -> usize {
        self.raster.iter().filter(|v| **v != 0).count()
    }

    /// Max-pool to `rows × cols` blocks of `cell_px` pixels.
    pub fn pooled(&self, cell_px: usize) -> Vec<f32> {
        let (rows, cols) = (self.height / cell_px, self.width / cell_px);
        let mut out = vec![0.0f32; rows * cols];
        for r in 0..rows * cell_px {
            for c in 0..cols * cell_px {
                if self.raster[r * self.width + c] != 0 {
                    out[(r / cell_px) * cols + c / cell_px] = 1.0;
                }
            }
        }
        out
    }
}

/// Robot-centric scan image with the dimensions of the paired map.
pub fn scan_to_image<T: Scalar>(scan: &Scan<T>, geometry: &GridGeometry) -> ScanImage {
    let (h, w) = (geometry.height_px(), geometry.width_px());
    let center = ((h / 2) as f64, (w / 2) as f64);
    let mut img = ScanImage { raster: vec![0; h * w], height: h, width: w, frame: ScanFrame::RobotCentric };
    splat(scan, geometry.resolution, center, 0.0, &mut img);
    img
}

/// Scan image in map coordinates for a robot at `pose`.
pub fn scan_to_map_image<T: Scalar>(scan: &Scan<T>, geometry: &GridGeometry, pose: &ContinuousPose) -> ScanImage {
    let (h, w) = (geometry.height_px(), geometry.width_px());
    let res = geometry.resolution;
    let (row, col) = geometry.cell_of(pose.x, pose.y).unwrap_or((0, 0));
    let frame = ScanFrame::MapAt { row, col, heading: geometry.heading_index(pose.heading) };
    let mut img = ScanImage { raster: vec![0; h * w], height: h, width: w, frame };
    splat(scan, res, ((pose.y / res).floor(), (pose.x / res).floor()), pose.heading, &mut img);
    img
}

/// `side × side` crop of the map-frame image for a robot at `pose`, with the
/// robot's pixel at `(side/2, side/2)`.
pub fn scan_crop<T: Scalar>(scan: &Scan<T>, resolution: f64, pose: &ContinuousPose, side: usize) -> Vec<u8> {
    let mut img = ScanImage { raster: vec![0; side * side], height: side, width: side, frame: ScanFrame::RobotCentric };
    let c = (side / 2) as f64;
    splat(scan, resolution, (c, c), pose.heading, &mut img);
    img.raster
}

fn splat<T: Scalar>(scan: &Scan<T>, res: f64, center: (f64, f64), heading: f64, img: &mut ScanImage) {
    for (i, r) in scan.ranges.iter().enumerate() {
        if !r.is_finite() {
            continue;
        }
        let d = r.f64() / res;
        let (sin, cos) = (heading + scan.config.beam_angle(i)).sin_cos();
        let col = center.1 + (d * cos).round();
        let row = center.0 - (d * sin).round();
        if row >= 0.0 && col >= 0.0 && (row as usize) < img.height && (col as usize) < img.width {
            img.raster[row as usize * img.width + col as usize] = 1;
        }
    }
}
