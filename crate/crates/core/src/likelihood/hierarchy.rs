//! Coarse-to-fine refinement of a likelihood grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::provider::{BlockProvider, BlockQuery};
use super::scoring::{capped, cosine, softmax_slice, Level, LikelihoodGrid};
use crate::error::{Error, Result};
use crate::grid::{CellPose, Grid3, Shape3};
use crate::lidar::{cast_unchecked, scan_crop, LidarConfig, Scan};
use crate::mapgen::GridMap;
use crate::num::Scalar;
use crate::pose::ContinuousPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    /// Number of most likely coarse poses to refine; `0` only copies.
    pub c: usize,
    /// Sub-cells per coarse cell side.
    pub k: usize,
    /// Side of the square map and scan crops handed to the fine model, pixels.
    pub crop_px: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self { c: 4, k: 3, crop_px: 64 }
    }
}

impl HierarchyConfig {
    pub fn validate(&self, coarse: Shape3) -> Result<()> {
        if self.k < 2 {
            return Err(Error::param(format!("k = {} must be at least 2", self.k)));
        }
        if self.crop_px < self.k {
            return Err(Error::param(format!("crop of {} px cannot hold {} sub-cells", self.crop_px, self.k)));
        }
        if self.c > coarse.len() {
            return Err(Error::param(format!("c = {} exceeds the {} coarse poses", self.c, coarse.len())));
        }
        Ok(())
    }

    pub fn fine_shape(&self, coarse: Shape3) -> Shape3 {
        Shape3::new(coarse.headings, coarse.rows * self.k, coarse.cols * self.k)
    }
}

/// Indices of the `c` largest values; ties go to the lower index.
pub fn top_indices<T: Scalar>(values: &[T], c: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*b].partial_cmp(&values[*a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(b)));
    idx.truncate(c);
    idx
}

/// Builds the crops for `cell`, queries `provider`, and returns its block
/// normalized to sum one (uniform when the provider returns no mass).
pub fn fine_block<T: Scalar>(
    map: &GridMap,
    scan: &Scan<T>,
    cell: CellPose,
    cfg: &HierarchyConfig,
    provider: &dyn BlockProvider<T>,
) -> Result<Vec<T>> {
    let g = map.geometry();
    let (x, y) = g.centroid(cell.row, cell.col);
    let map_crop = map.crop(cell.row, cell.col, cfg.crop_px);
    let pose = ContinuousPose::new(x, y, g.heading_angle(cell.heading));
    let scan_img = scan_crop(scan, g.resolution, &pose, cfg.crop_px);
    let query = BlockQuery { cell, k: cfg.k, map_crop: &map_crop, scan_crop: &scan_img, crop_px: cfg.crop_px, scan };
    let mut block = provider.block(&query)?;
    let kk = cfg.k * cfg.k;
    if block.len() != kk {
        return Err(Error::Input(format!("fine block has {} values, expected {kk}", block.len())));
    }
    let total: T = block.iter().copied().sum();
    if total.is_finite() && total > T::zero() && block.iter().all(|v| *v >= T::zero()) {
        block.iter_mut().for_each(|v| *v /= total);
    } else {
        block = vec![T::one() / T::lit(kk as f64); kk];
    }
    Ok(block)
}

/// Expands a coarse likelihood to `Θ × kN × kM`. The top `c` coarse poses
/// are split according to a fine block from `provider`; every other pose
/// spreads its value evenly over its `k²` sub-cells. The result is
/// renormalized.
pub fn refine_hierarchical<T: Scalar>(
    coarse: &LikelihoodGrid<T>,
    map: &GridMap,
    scan: &Scan<T>,
    cfg: &HierarchyConfig,
    provider: &dyn BlockProvider<T>,
) -> Result<LikelihoodGrid<T>> {
    if coarse.level != Level::Coarse {
        return Err(Error::param("refinement expects a coarse likelihood"));
    }
    let shape = coarse.shape();
    if shape != map.geometry().shape() {
        return Err(Error::param(format!(
            "likelihood shape {:?} does not match the map grid {:?}",
            shape.as_array(),
            map.geometry().shape().as_array()
        )));
    }
    cfg.validate(shape)?;
    let k = cfg.k;
    let fine_shape = cfg.fine_shape(shape);
    let mut fine = Grid3::zeros(fine_shape);
    let values = coarse.values.as_slice();
    let mut refined = vec![false; shape.len()];
    for i in top_indices(values, cfg.c) {
        refined[i] = true;
    }
    let share = T::one() / T::lit((k * k) as f64);
    for (i, v) in values.iter().enumerate() {
        let cell = shape.pose(i);
        let block = if refined[i] { Some(fine_block(map, scan, cell, cfg, provider)?) } else { None };
        for a in 0..k {
            for b in 0..k {
                let w = block.as_ref().map_or(share, |blk| blk[a * k + b]);
                fine.set(CellPose::new(cell.heading, cell.row * k + a, cell.col * k + b), *v * w);
            }
        }
    }
    fine.normalize();
    Ok(LikelihoodGrid { values: fine, level: Level::Fine, beta: coarse.beta })
}

/// Fine-level stand-in for a learned model: casts from the `k × k`
/// sub-cell centroids at the query heading and scores them against the
/// query scan by cosine similarity.
#[derive(Debug, Clone)]
pub struct FineScanMatchingProvider {
    map: Arc<GridMap>,
    lidar: LidarConfig,
    beta: f64,
}

impl FineScanMatchingProvider {
    pub fn new(map: Arc<GridMap>, lidar: LidarConfig, beta: f64) -> Self {
        Self { map, lidar, beta }
    }

    /// Metric centroid of sub-cell `(a, b)` of a coarse cell.
    pub fn sub_centroid(map: &GridMap, cell: CellPose, k: usize, a: usize, b: usize) -> (f64, f64) {
        let pitch = map.geometry().l_m();
        (
            (cell.col as f64 + (b as f64 + 0.5) / k as f64) * pitch,
            (cell.row as f64 + (a as f64 + 0.5) / k as f64) * pitch,
        )
    }
}

impl<T: Scalar> BlockProvider<T> for FineScanMatchingProvider {
    fn block(&self, q: &BlockQuery<'_, T>) -> Result<Vec<T>> {
        let k = q.k;
        let reduced;
        let scan = if q.scan.beams() == self.lidar.beams && q.scan.config.fov == self.lidar.fov {
            q.scan
        } else {
            reduced = q.scan.reduce_to(self.lidar.beams);
            &reduced
        };
        let cap = T::lit(self.lidar.max_range);
        let (query, qnorm) = capped(&scan.ranges, cap);
        let heading = self.map.geometry().heading_angle(q.cell.heading);
        let mut scores = Vec::with_capacity(k * k);
        let mut valid = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                let (x, y) = Self::sub_centroid(&self.map, q.cell, k, a, b);
                if !self.map.is_free_point(x, y) {
                    valid.push(false);
                    continue;
                }
                let row: Vec<T> = cast_unchecked(&self.map, &ContinuousPose::new(x, y, heading), &self.lidar);
                let (row, norm) = capped(&row, cap);
                scores.push(cosine(&query, qnorm, &row, norm, cap));
                valid.push(true);
            }
        }
        if scores.is_empty() {
            return Ok(vec![T::one() / T::lit((k * k) as f64); k * k]);
        }
        let mut probs = softmax_slice(&scores, self.beta)?.into_iter();
        Ok(valid.into_iter().map(|v| if v { probs.next().unwrap() } else { T::zero() }).collect())
    }
}
