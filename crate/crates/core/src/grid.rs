//! Dense heading × row × column tensors and discrete poses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Discrete pose on a coarse (or fine) grid. Ordering is lexicographic in
/// `(heading, row, col)`, which is the tie-break order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellPose {
    pub heading: usize,
    pub row: usize,
    pub col: usize,
}

impl CellPose {
    pub const fn new(heading: usize, row: usize, col: usize) -> Self {
        Self { heading, row, col }
    }

    /// Manhattan pose distance: `|Δrow| + |Δcol|` plus the circular heading
    /// index distance.
    pub fn manhattan(&self, other: &CellPose, headings: usize) -> usize {
        let dh = self.heading.abs_diff(other.heading);
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col) + dh.min(headings - dh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape3 {
    pub headings: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Shape3 {
    pub const fn new(headings: usize, rows: usize, cols: usize) -> Self {
        Self { headings, rows, cols }
    }

    pub const fn len(&self) -> usize {
        self.headings * self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn index(&self, p: CellPose) -> usize {
        debug_assert!(p.heading < self.headings && p.row < self.rows && p.col < self.cols);
        (p.heading * self.rows + p.row) * self.cols + p.col
    }

    #[inline]
    pub fn pose(&self, index: usize) -> CellPose {
        let col = index % self.cols;
        let row = (index / self.cols) % self.rows;
        let heading = index / self.plane();
        CellPose { heading, row, col }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.headings, self.rows, self.cols]
    }
}

/// Row-major, heading-major dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3<T> {
    shape: Shape3,
    data: Vec<T>,
}

impl<T: Scalar> Grid3<T> {
    pub fn zeros(shape: Shape3) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: Shape3, value: T) -> Self {
        Self { shape, data: vec![value; shape.len()] }
    }

    pub fn from_vec(shape: Shape3, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::param(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape.as_array()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, p: CellPose) -> T {
        self.data[self.shape.index(p)]
    }

    #[inline]
    pub fn set(&mut self, p: CellPose, v: T) {
        let i = self.shape.index(p);
        self.data[i] = v;
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Scales so the entries sum to one. Returns the pre-normalization total.
    pub fn normalize(&mut self) -> T {
        let total = self.sum();
        if total > T::zero() {
            let inv = T::one() / total;
            self.data.iter_mut().for_each(|v| *v *= inv);
        }
        total
    }

    /// First maximum in `(heading, row, col)` order.
    pub fn argmax(&self) -> CellPose {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        self.shape.pose(best)
    }

    pub fn poses(&self) -> impl Iterator<Item = (CellPose, T)> + '_ {
        self.data.iter().enumerate().map(move |(i, v)| (self.shape.pose(i), *v))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Grid3<U> {
        Grid3 { shape: self.shape, data: self.data.iter().map(|v| f(*v)).collect() }
    }
}
