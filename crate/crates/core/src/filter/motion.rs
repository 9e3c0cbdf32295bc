use serde::{Deserialize, Serialize};

use super::belief::BeliefGrid;
use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::mapgen::{GridMap, OCTANT_STEPS};
use crate::num::Scalar;

/// Discrete robot action. Wire encoding: `0 = Left`, `1 = Right`,
/// `2 = Forward`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    /// Rotate counter-clockwise by one heading step.
    Left,
    /// Rotate clockwise by one heading step.
    Right,
    /// Move one cell along the current heading.
    Forward,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Left, Action::Right, Action::Forward];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or_else(|| Error::param(format!("action {i} is not 0, 1 or 2")))
    }

    /// Heading index change.
    pub fn turn(self) -> isize {
        match self {
            Action::Left => 1,
            Action::Right => -1,
            Action::Forward => 0,
        }
    }
}

/// Smoothing applied after each transition, in cell units per axis, plus
/// the probability a forward move does not happen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub sigma_heading: f64,
    pub sigma_row: f64,
    pub sigma_col: f64,
    pub slip_prob: f64,
}

impl MotionNoise {
    pub const NONE: MotionNoise = MotionNoise { sigma_heading: 0.0, sigma_row: 0.0, sigma_col: 0.0, slip_prob: 0.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = [self.sigma_heading, self.sigma_row, self.sigma_col].iter().all(|s| s.is_finite() && *s >= 0.0);
        if !ok || !(0.0..=1.0).contains(&self.slip_prob) {
            return Err(Error::param(format!("invalid motion noise {self:?}")));
        }
        Ok(())
    }
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self { sigma_heading: 0.25, sigma_row: 0.5, sigma_col: 0.5, slip_prob: 0.0 }
    }
}

const TAPS: isize = 2;

fn kernel(sigma: f64) -> Option<[f64; 5]> {
    if sigma <= 0.0 {
        return None;
    }
    let mut k = [0.0; 5];
    for (j, w) in k.iter_mut().enumerate() {
        let d = j as f64 - TAPS as f64;
        *w = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    Some(k)
}

/// Spreads each entry over up to five neighbours along one axis. `circular`
/// wraps indices; otherwise taps outside `[0, len)` are dropped and the
/// remaining weights rescaled so every source keeps its mass.
fn smooth_axis<T: Scalar>(data: &[T], len: usize, stride: usize, k: &[f64; 5], circular: bool) -> Vec<T> {
    let mut out = vec![T::zero(); data.len()];
    for (i, v) in data.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let pos = (i / stride) % len;
        let base = i - pos * stride;
        let targets = (-TAPS..=TAPS).filter_map(|d| {
            let p = pos as isize + d;
            let p = if circular {
                p.rem_euclid(len as isize)
            } else if p < 0 || p >= len as isize {
                return None;
            } else {
                p
            };
            Some((base + p as usize * stride, k[(d + TAPS) as usize]))
        });
        let kept: f64 = targets.clone().map(|(_, w)| w).sum();
        let scale = T::lit(1.0 / kept);
        for (j, w) in targets {
            out[j] += *v * T::lit(w) * scale;
        }
    }
    out
}

/// Prediction step. Turns rotate the heading axis; `Forward` moves each
/// heading plane one cell along that heading's octant, leaving mass in place
/// where the move is blocked. Smoothing follows, then obstacle cells are
/// cleared and the grid renormalized.
pub fn transition<T: Scalar>(
    belief: &BeliefGrid<T>,
    action: Action,
    noise: &MotionNoise,
    map: &GridMap,
) -> Result<BeliefGrid<T>> {
    let shape = belief.shape();
    let g = map.geometry();
    if shape != g.shape() {
        return Err(Error::param(format!(
            "belief shape {:?} does not match map grid {:?}",
            shape.as_array(),
            g.shape().as_array()
        )));
    }
    noise.validate()?;
    let plane = shape.plane();
    let src = belief.as_slice();
    let mut out = vec![T::zero(); shape.len()];
    match action {
        Action::Left | Action::Right => {
            let th = shape.headings as isize;
            for h in 0..shape.headings {
                let to = (h as isize + action.turn()).rem_euclid(th) as usize;
                out[to * plane..(to + 1) * plane].copy_from_slice(&src[h * plane..(h + 1) * plane]);
            }
        }
        Action::Forward => {
            let slip = T::lit(noise.slip_prob);
            let go = T::one() - slip;
            for h in 0..shape.headings {
                let o = g.heading_octant(h);
                let (dr, dc) = OCTANT_STEPS[o];
                for r in 0..shape.rows {
                    for c in 0..shape.cols {
                        let i = h * plane + r * shape.cols + c;
                        let v = src[i];
                        if v.is_zero() {
                            continue;
                        }
                        if map.can_move(r, c, o) {
                            let (nr, nc) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
                            out[h * plane + nr * shape.cols + nc] += v * go;
                            out[i] += v * slip;
                        } else {
                            out[i] += v;
                        }
                    }
                }
            }
        }
    }
    if let Some(k) = kernel(noise.sigma_heading) {
        out = smooth_axis(&out, shape.headings, plane, &k, true);
    }
    if let Some(k) = kernel(noise.sigma_row) {
        out = smooth_axis(&out, shape.rows, shape.cols, &k, false);
    }
    if let Some(k) = kernel(noise.sigma_col) {
        out = smooth_axis(&out, shape.cols, 1, &k, false);
    }
    let mask = map.cell_mask();
    for (i, v) in out.iter_mut().enumerate() {
        if !mask[i % plane] {
            *v = T::zero();
        }
    }
    let mut values = Grid3::from_vec(shape, out)?;
    if values.normalize() <= T::zero() {
        // everything landed on obstacles; keep the input rather than return zeros
        return Ok(belief.clone());
    }
    Ok(BeliefGrid { values, level: belief.level })
}
