//! Precomputed range vectors at every coarse centroid and heading.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::raycast::cast_unchecked;
use super::scan::{LidarConfig, Scan};
use crate::error::{Error, Result};
use crate::grid::{CellPose, Shape3};
use crate::mapgen::{GridGeometry, GridMap};
use crate::num::Scalar;
use crate::pose::ContinuousPose;

const MAGIC: &[u8; 4] = b"ALSM";
const VERSION: u32 = 1;

/// `Θ × N × M × B` ranges, heading-major. Rows of obstacle cells are zero
/// and flagged invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanMatrix<T> {
    shape: Shape3,
    beams: usize,
    ranges: Vec<T>,
    /// Per coarse cell (`N × M`).
    valid: Vec<bool>,
    /// Euclidean norm of each row with `+∞` read as `max_range`.
    norms: Vec<T>,
    lidar: LidarConfig,
}

impl<T: Scalar> ScanMatrix<T> {
    pub fn build(map: &GridMap, lidar: &LidarConfig) -> Result<Self> {
        lidar.validate()?;
        let g = *map.geometry();
        let shape = g.shape();
        let b = lidar.beams;
        let valid = map.cell_mask().to_vec();
        let mut ranges = vec![T::zero(); shape.len() * b];
        ranges.par_chunks_mut(b).enumerate().for_each(|(idx, row)| {
            let pose = shape.pose(idx);
            if !valid[pose.row * g.cols + pose.col] {
                return;
            }
            let (x, y) = g.centroid(pose.row, pose.col);
            let cp = ContinuousPose::new(x, y, g.heading_angle(pose.heading));
            row.copy_from_slice(&cast_unchecked::<T>(map, &cp, lidar));
        });
        Ok(Self::assemble(shape, b, ranges, valid, *lidar))
    }

    /// Wraps precomputed rows. `valid` is per coarse cell (`N × M`).
    pub fn from_parts(shape: Shape3, lidar: LidarConfig, ranges: Vec<T>, valid: Vec<bool>) -> Result<Self> {
        lidar.validate()?;
        if ranges.len() != shape.len() * lidar.beams || valid.len() != shape.plane() {
            return Err(Error::param(format!(
                "scan matrix parts do not match shape {:?} × {} beams",
                shape.as_array(),
                lidar.beams
            )));
        }
        Ok(Self::assemble(shape, lidar.beams, ranges, valid, lidar))
    }

    fn assemble(shape: Shape3, beams: usize, ranges: Vec<T>, valid: Vec<bool>, lidar: LidarConfig) -> Self {
        let cap = T::lit(lidar.max_range);
        let norms = ranges
            .chunks(beams)
            .map(|row| {
                row.iter()
                    .map(|r| {
                        let v = r.min(cap);
                        v * v
                    })
                    .sum::<T>()
                    .sqrt()
            })
            .collect();
        Self { shape, beams, ranges, valid, norms, lidar }
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn lidar(&self) -> &LidarConfig {
        &self.lidar
    }

    /// `[Θ, N, M, B]`.
    pub fn dims(&self) -> [usize; 4] {
        [self.shape.headings, self.shape.rows, self.shape.cols, self.beams]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.shape.cols + col]
    }

    pub fn valid_rows(&self) -> usize {
        self.valid.iter().filter(|v| **v).count() * self.shape.headings
    }

    pub fn row(&self, pose: CellPose) -> &[T] {
        let i = self.shape.index(pose);
        &self.ranges[i * self.beams..(i + 1) * self.beams]
    }

    pub(crate) fn row_at(&self, index: usize) -> &[T] {
        &self.ranges[index * self.beams..(index + 1) * self.beams]
    }

    pub(crate) fn norm_at(&self, index: usize) -> T {
        self.norms[index]
    }

    pub(crate) fn valid_at(&self, index: usize) -> bool {
        let plane = self.shape.rows * self.shape.cols;
        self.valid[index % plane]
    }

    /// The stored row as a scan.
    pub fn scan(&self, pose: CellPose) -> Scan<T> {
        Scan { ranges: self.row(pose).to_vec(), config: self.lidar }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.ranges
    }

    /// Cache file: `ALSM`, version, then `Θ, N, M, B` as little-endian
    /// `u32`, followed by the ranges as little-endian `f32`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(24 + 4 * self.ranges.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in self.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for r in &self.ranges {
            out.extend_from_slice(&r.f32().to_le_bytes());
        }
        fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    /// Loads a cache file, checking its dimensions against `geometry` and
    /// `lidar`. Rows that are entirely zero are treated as invalid cells.
    pub fn read(path: &Path, geometry: &GridGeometry, lidar: &LidarConfig) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("{}: not a scan matrix cache", path.display())));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        if word(1) != VERSION as usize {
            return Err(Error::Format(format!("unsupported scan matrix version {}", word(1))));
        }
        let dims = [word(2), word(3), word(4), word(5)];
        let expect = [geometry.headings, geometry.rows, geometry.cols, lidar.beams];
        if dims != expect {
            return Err(Error::Format(format!("cache dims {dims:?} do not match {expect:?}")));
        }
        let n = dims.iter().product::<usize>();
        let payload = &bytes[24..];
        if payload.len() != 4 * n {
            return Err(Error::Format(format!("cache payload has {} bytes, expected {}", payload.len(), 4 * n)));
        }
        let ranges: Vec<T> =
            payload.chunks_exact(4).map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect();
        let shape = geometry.shape();
        let plane = shape.rows * shape.cols;
        let valid =
            (0..plane).map(|i| ranges[i * lidar.beams..(i + 1) * lidar.beams].iter().any(|r| !r.is_zero())).collect();
        Ok(Self::assemble(shape, lidar.beams, ranges, valid, *lidar))
    }
}
