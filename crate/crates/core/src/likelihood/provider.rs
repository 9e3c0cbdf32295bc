use std::sync::Arc;

use super::scoring::{cosine_scores, tempered_softmax, Level, LikelihoodGrid};
use crate::error::Result;
use crate::grid::{CellPose, Shape3};
use crate::lidar::{Scan, ScanMatrix};
use crate::num::Scalar;

/// Maps a scan to a likelihood over every pose of one grid.
pub trait LikelihoodProvider<T: Scalar>: Send + Sync {
    fn likelihood(&self, scan: &Scan<T>) -> Result<LikelihoodGrid<T>>;
    fn shape(&self) -> Shape3;
}

/// Everything a fine-level model sees when refining one coarse cell.
#[derive(Debug, Clone, Copy)]
pub struct BlockQuery<'a, T> {
    pub cell: CellPose,
    /// Sub-cells per coarse cell side.
    pub k: usize,
    /// `crop_px × crop_px` occupancy crop centered on the cell centroid.
    pub map_crop: &'a [u8],
    /// Same-size scan image for a robot at the cell centroid and heading.
    pub scan_crop: &'a [u8],
    pub crop_px: usize,
    pub scan: &'a Scan<T>,
}

/// Produces a `k × k` row-major block of relative likelihoods.
pub trait BlockProvider<T: Scalar>: Send + Sync {
    fn block(&self, query: &BlockQuery<'_, T>) -> Result<Vec<T>>;
}

/// Cosine similarity against a scan matrix, then a tempered softmax.
#[derive(Debug, Clone)]
pub struct ScanMatchingProvider<T> {
    matrix: Arc<ScanMatrix<T>>,
    beta: f64,
}

impl<T: Scalar> ScanMatchingProvider<T> {
    pub fn new(matrix: Arc<ScanMatrix<T>>, beta: f64) -> Self {
        Self { matrix, beta }
    }

    pub fn matrix(&self) -> &Arc<ScanMatrix<T>> {
        &self.matrix
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl<T: Scalar> LikelihoodProvider<T> for ScanMatchingProvider<T> {
    /// Scans with a different beam layout are first resampled onto the
    /// matrix's beams.
    fn likelihood(&self, scan: &Scan<T>) -> Result<LikelihoodGrid<T>> {
        let reduced;
        let scan = if scan.beams() == self.matrix.beams() && scan.config.fov == self.matrix.lidar().fov {
            scan
        } else {
            reduced = scan.reduce_to(self.matrix.beams());
            &reduced
        };
        tempered_softmax(&cosine_scores(&self.matrix, scan)?, self.beta, Level::Coarse)
    }

    fn shape(&self) -> Shape3 {
        self.matrix.shape()
    }
}
