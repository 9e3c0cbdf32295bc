use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid3, Shape3};
use crate::lidar::{Scan, ScanMatrix};
use crate::num::Scalar;

/// Resolution level of a grid: coarse poses or `k × k` refined sub-cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Coarse,
    Fine,
}

/// Measurement likelihood over poses, normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodGrid<T> {
    pub values: Grid3<T>,
    pub level: Level,
    pub beta: f64,
}

impl<T: Scalar> LikelihoodGrid<T> {
    pub fn uniform(shape: Shape3, level: Level) -> Self {
        let v = T::one() / T::lit(shape.len() as f64);
        Self { values: Grid3::filled(shape, v), level, beta: 0.0 }
    }

    pub fn shape(&self) -> Shape3 {
        self.values.shape()
    }
}

/// Cosine similarity of `query` against one stored row, both capped at `cap`.
pub(crate) fn cosine<T: Scalar>(query: &[T], query_norm: T, row: &[T], row_norm: T, cap: T) -> T {
    let denom = query_norm * row_norm;
    if denom <= T::zero() {
        return T::zero();
    }
    // independent partial sums let the loop vectorize
    let mut acc = [T::zero(); 8];
    let (qc, rc) = (query.chunks_exact(8), row.chunks_exact(8));
    let mut dot = T::zero();
    for (q, r) in qc.remainder().iter().zip(rc.remainder()) {
        dot += *q * r.min(cap);
    }
    for (q, r) in qc.zip(rc) {
        for j in 0..8 {
            acc[j] += q[j] * r[j].min(cap);
        }
    }
    (acc.iter().copied().sum::<T>() + dot) / denom
}

pub(crate) fn capped<T: Scalar>(ranges: &[T], cap: T) -> (Vec<T>, T) {
    let v: Vec<T> = ranges.iter().map(|r| r.min(cap)).collect();
    let norm = v.iter().map(|x| *x * *x).sum::<T>().sqrt();
    (v, norm)
}

/// Cosine similarity of `scan` against every scan-matrix row. `+∞` beams are
/// read as the sensor's maximum range; invalid cells score `-1`.
pub fn cosine_scores<T: Scalar>(matrix: &ScanMatrix<T>, scan: &Scan<T>) -> Result<Grid3<T>> {
    if scan.beams() != matrix.beams() {
        return Err(Error::param(format!("scan has {} beams, scan matrix rows have {}", scan.beams(), matrix.beams())));
    }
    let cap = T::lit(matrix.lidar().max_range);
    let (query, qnorm) = capped(&scan.ranges, cap);
    let shape = matrix.shape();
    let scores = (0..shape.len())
        .map(|i| {
            if matrix.valid_at(i) {
                cosine(&query, qnorm, matrix.row_at(i), matrix.norm_at(i), cap)
            } else {
                -T::one()
            }
        })
        .collect();
    Grid3::from_vec(shape, scores)
}

/// `exp(β·s) / Σ exp(β·s)`, evaluated after subtracting the maximum score.
pub fn tempered_softmax<T: Scalar>(scores: &Grid3<T>, beta: f64, level: Level) -> Result<LikelihoodGrid<T>> {
    let values = softmax_slice(scores.as_slice(), beta)?;
    Ok(LikelihoodGrid { values: Grid3::from_vec(scores.shape(), values)?, level, beta })
}

pub(crate) fn softmax_slice<T: Scalar>(scores: &[T], beta: f64) -> Result<Vec<T>> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::param(format!("temperature β = {beta} must be positive")));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Input(format!("non-finite score {bad}")));
    }
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let b = T::lit(beta);
    let mut out: Vec<T> = scores.iter().map(|s| (b * (*s - max)).exp()).collect();
    let total: T = out.iter().copied().sum();
    let inv = T::one() / total;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}
