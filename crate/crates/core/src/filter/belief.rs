use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{CellPose, Grid3, Shape3};
use crate::likelihood::Level;
use crate::mapgen::GridMap;
use crate::num::Scalar;

const MAGIC: &[u8; 4] = b"ALBF";
const VERSION: u32 = 1;
/// Snapshot header length in bytes.
pub const SNAPSHOT_HEADER: usize = 24;

/// Probability mass over `(heading, row, col)` poses.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid<T> {
    pub values: Grid3<T>,
    pub level: Level,
}

impl<T: Scalar> BeliefGrid<T> {
    pub fn new(values: Grid3<T>) -> Self {
        Self { values, level: Level::Coarse }
    }

    /// Point mass at `pose`.
    pub fn one_hot(shape: Shape3, pose: CellPose) -> Self {
        let mut values = Grid3::zeros(shape);
        values.set(pose, T::one());
        Self::new(values)
    }

    pub fn shape(&self) -> Shape3 {
        self.values.shape()
    }

    pub fn get(&self, pose: CellPose) -> T {
        self.values.get(pose)
    }

    pub fn as_slice(&self) -> &[T] {
        self.values.as_slice()
    }

    pub fn sum(&self) -> T {
        self.values.sum()
    }

    /// Total mass per coarse cell, summed over headings (`N × M`).
    pub fn marginal(&self) -> Vec<T> {
        let s = self.shape();
        let mut out = vec![T::zero(); s.plane()];
        for (i, v) in self.as_slice().iter().enumerate() {
            out[i % s.plane()] += *v;
        }
        out
    }

    /// `ALBF`, version, level, `Θ, N, M` as little-endian `u32`, then the
    /// values as little-endian `f32` in heading-major order.
    pub fn write_snapshot<W: Write>(&self, out: &mut W) -> Result<usize> {
        let s = self.shape();
        let mut buf = Vec::with_capacity(SNAPSHOT_HEADER + 4 * s.len());
        buf.extend_from_slice(MAGIC);
        for w in [VERSION, u32::from(self.level == Level::Fine), s.headings as u32, s.rows as u32, s.cols as u32] {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        for v in self.as_slice() {
            buf.extend_from_slice(&v.f32().to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(buf.len())
    }

    pub fn read_snapshot<R: Read>(input: &mut R) -> Result<Self> {
        let mut head = [0u8; SNAPSHOT_HEADER];
        input.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("not a belief snapshot".into()));
        }
        let word = |i: usize| u32::from_le_bytes(head[4 * i..4 * i + 4].try_into().unwrap());
        if word(1) != VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {}", word(1))));
        }
        let level = if word(2) == 1 { Level::Fine } else { Level::Coarse };
        let shape = Shape3::new(word(3) as usize, word(4) as usize, word(5) as usize);
        let mut payload = vec![0u8; 4 * shape.len()];
        input.read_exact(&mut payload)?;
        let data = payload.chunks_exact(4).map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect();
        Ok(Self { values: Grid3::from_vec(shape, data)?, level })
    }
}

/// Equal mass on every heading of every free coarse cell.
pub fn uniform_belief<T: Scalar>(map: &GridMap) -> Result<BeliefGrid<T>> {
    let free = map.free_cell_count();
    if free == 0 {
        return Err(Error::Map("map has no free cells".into()));
    }
    let shape = map.geometry().shape();
    let v = T::one() / T::lit((free * shape.headings) as f64);
    let mask = map.cell_mask();
    let data = (0..shape.len()).map(|i| if mask[i % shape.plane()] { v } else { T::zero() }).collect();
    Ok(BeliefGrid::new(Grid3::from_vec(shape, data)?))
}

/// Most probable pose; the lexicographically smallest one on ties.
pub fn map_estimate<T: Scalar>(belief: &BeliefGrid<T>) -> CellPose {
    belief.values.argmax()
}

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn entropy<T: Scalar>(belief: &BeliefGrid<T>) -> f64 {
    -belief.as_slice().iter().map(|p| p.f64()).filter(|p| *p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapgen::open_room;

    #[test]
    fn uniform_over_free_cells() {
        let m = open_room(3, 8, 4);
        let b: BeliefGrid<f64> = uniform_belief(&m).unwrap();
        let f = m.free_cell_count();
        assert!(b.as_slice().iter().all(|v| *v == 0.0 || (*v - 1.0 / (4.0 * f as f64)).abs() < 1e-15));
        assert!((entropy(&b) - ((4 * f) as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_values() {
        let shape = Shape3::new(1, 1, 3);
        let b = BeliefGrid::new(Grid3::from_vec(shape, vec![0.5, 0.25, 0.25]).unwrap());
        assert!((entropy(&b) - 1.5 * 2f64.ln()).abs() < 1e-12);
        assert!((entropy(&b) - 1.0397).abs() < 1e-4);
        assert_eq!(entropy(&BeliefGrid::<f64>::one_hot(shape, CellPose::new(0, 0, 1))), 0.0);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let shape = Shape3::new(2, 2, 2);
        let mut g = Grid3::zeros(shape);
        g.set(CellPose::new(1, 0, 0), 0.5);
        g.set(CellPose::new(0, 1, 1), 0.5);
        assert_eq!(map_estimate(&BeliefGrid::<f64>::new(g)), CellPose::new(0, 1, 1));
    }

    #[test]
    fn snapshot_round_trip() {
        let shape = Shape3::new(2, 3, 4);
        let b = BeliefGrid::new(Grid3::from_vec(shape, (0..24).map(|i| i as f32 / 276.0).collect()).unwrap());
        let mut buf = Vec::new();
        assert_eq!(b.write_snapshot(&mut buf).unwrap(), SNAPSHOT_HEADER + 96);
        let back = BeliefGrid::<f32>::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back, b);
        assert!(BeliefGrid::<f32>::read_snapshot(&mut &buf[..30]).is_err());
    }
}
