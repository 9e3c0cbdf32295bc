//! High-resolution occupancy rasters bound to a coarse pose grid.
//!
//! Frames: pixel `(row, col)` covers `x ∈ [col·res, (col+1)·res)` and
//! `y ∈ [row·res, (row+1)·res)`, so `y` grows downward. Headings are
//! measured counter-clockwise as seen on the image, i.e. heading `φ` moves
//! along `(dx, dy) = (cos φ, −sin φ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellPose, Shape3};

pub const OBSTACLE: u8 = 0;
pub const FREE: u8 = 1;

/// Unit steps `(drow, dcol)` for the eight octants, counter-clockwise from east.
pub const OCTANT_STEPS: [(isize, isize); 8] = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    /// Coarse rows (N).
    pub rows: usize,
    /// Coarse columns (M).
    pub cols: usize,
    /// Heading count (Θ).
    pub headings: usize,
    /// Pixels per coarse cell side.
    pub cell_px: usize,
    /// Meters per pixel.
    pub resolution: f64,
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize, headings: usize, cell_px: usize, resolution: f64) -> Result<Self> {
        let g = Self { rows, cols, headings, cell_px, resolution };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::param("coarse grid must be non-empty"));
        }
        if self.headings < 2 {
            return Err(Error::param(format!("need at least 2 headings, got {}", self.headings)));
        }
        if self.cell_px == 0 {
            return Err(Error::param("cell_px must be positive"));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::param(format!("resolution {} must be positive", self.resolution)));
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape3 {
        Shape3::new(self.headings, self.rows, self.cols)
    }

    pub fn height_px(&self) -> usize {
        self.rows * self.cell_px
    }

    pub fn width_px(&self) -> usize {
        self.cols * self.cell_px
    }

    /// Centroid-to-centroid distance along rows, meters.
    pub fn l_n(&self) -> f64 {
        self.cell_px as f64 * self.resolution
    }

    /// Centroid-to-centroid distance along columns, meters.
    pub fn l_m(&self) -> f64 {
        self.cell_px as f64 * self.resolution
    }

    pub fn heading_angle(&self, heading: usize) -> f64 {
        std::f64::consts::TAU * heading as f64 / self.headings as f64
    }

    /// Nearest heading index for an arbitrary angle.
    pub fn heading_index(&self, angle: f64) -> usize {
        let k = (angle.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * self.headings as f64).round();
        (k as usize) % self.headings
    }

    /// Octant a heading moves along when going forward.
    pub fn heading_octant(&self, heading: usize) -> usize {
        ((heading as f64 * 8.0 / self.headings as f64).round() as usize) % 8
    }

    /// Cell centroid in meters `(x, y)`.
    pub fn centroid(&self, row: usize, col: usize) -> (f64, f64) {
        let pitch = self.l_m();
        ((col as f64 + 0.5) * pitch, (row as f64 + 0.5) * self.l_n())
    }

    /// Cell containing a metric position, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (r, c) = ((y / self.l_n()).floor() as usize, (x / self.l_m()).floor() as usize);
        (r < self.rows && c < self.cols).then_some((r, c))
    }

    /// Snap a continuous pose to the nearest centroid and heading.
    pub fn snap(&self, x: f64, y: f64, heading: f64) -> Option<CellPose> {
        self.cell_of(x, y).map(|(r, c)| CellPose::new(self.heading_index(heading), r, c))
    }
}

/// Occupancy raster (`0 = obstacle`, `1 = free`) plus its coarse topology.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    occupancy: Vec<u8>,
    geometry: GridGeometry,
    cell_free: Vec<bool>,
    /// Per coarse cell, bit `o` set when moving one cell along octant `o` is
    /// unobstructed.
    moves: Vec<u8>,
}

impl GridMap {
    /// Wraps a raster. The outermost pixel ring is forced to obstacle.
    pub fn new(mut occupancy: Vec<u8>, geometry: GridGeometry) -> Result<Self> {
        geometry.validate()?;
        let (h, w) = (geometry.height_px(), geometry.width_px());
        if occupancy.len() != h * w {
            return Err(Error::Map(format!(
                "raster has {} pixels, geometry {}×{} cells of {} px needs {h}×{w}",
                occupancy.len(),
                geometry.rows,
                geometry.cols,
                geometry.cell_px
            )));
        }
        for v in occupancy.iter_mut() {
            *v = u8::from(*v != OBSTACLE);
        }
        for c in 0..w {
            occupancy[c] = OBSTACLE;
            occupancy[(h - 1) * w + c] = OBSTACLE;
        }
        for r in 0..h {
            occupancy[r * w] = OBSTACLE;
            occupancy[r * w + w - 1] = OBSTACLE;
        }
        let mut map = Self { occupancy, geometry, cell_free: Vec::new(), moves: Vec::new() };
        map.rebuild_topology();
        Ok(map)
    }

    fn rebuild_topology(&mut self) {
        let g = self.geometry;
        self.cell_free = (0..g.rows * g.cols).map(|i| self.judge_cell_free(i / g.cols, i % g.cols)).collect();
        let mut moves = vec![0u8; g.rows * g.cols];
        for r in 0..g.rows {
            for c in 0..g.cols {
                if !self.cell_free[r * g.cols + c] {
                    continue;
                }
                let (cx, cy) = self.centroid_px(r, c);
                for (o, (dr, dc)) in OCTANT_STEPS.iter().enumerate() {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr as usize >= g.rows || nc as usize >= g.cols {
                        continue;
                    }
                    if !self.cell_free[nr as usize * g.cols + nc as usize] {
                        continue;
                    }
                    let (tx, ty) = self.centroid_px(nr as usize, nc as usize);
                    let len = ((tx - cx).powi(2) + (ty - cy).powi(2)).sqrt();
                    let dir = ((tx - cx) / len, (ty - cy) / len);
                    if self.cast_px((cx, cy), dir, len).is_none_or(|t| t >= len) {
                        moves[r * g.cols + c] |= 1 << o;
                    }
                }
            }
        }
        self.moves = moves;
    }

    /// Free when the centroid pixel is free and a majority vote over a window
    /// of side `2·max(1, cell_px/4)` pixels around it agrees.
    fn judge_cell_free(&self, r: usize, c: usize) -> bool {
        let (x, y) = self.centroid_px(r, c);
        if !self.is_free_px(y as usize, x as usize) {
            return false;
        }
        let cp = self.geometry.cell_px as f64;
        let half = (self.geometry.cell_px / 4).max(1) as f64;
        let (cx, cy) = ((c as f64 + 0.5) * cp, (r as f64 + 0.5) * cp);
        let (r0, r1) = ((cy - half).floor() as usize, (cy + half).ceil() as usize);
        let (c0, c1) = ((cx - half).floor() as usize, (cx + half).ceil() as usize);
        let (mut free, mut total) = (0usize, 0usize);
        for pr in r0..r1.min(self.height()) {
            for pc in c0..c1.min(self.width()) {
                total += 1;
                free += usize::from(self.is_free_px(pr, pc));
            }
        }
        2 * free > total
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    pub fn height(&self) -> usize {
        self.geometry.height_px()
    }

    pub fn width(&self) -> usize {
        self.geometry.width_px()
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    #[inline]
    pub fn is_free_px(&self, row: usize, col: usize) -> bool {
        row < self.height() && col < self.width() && self.occupancy[row * self.width() + col] == FREE
    }

    /// Whether the pixel containing metric position `(x, y)` is free.
    pub fn is_free_point(&self, x: f64, y: f64) -> bool {
        let res = self.resolution();
        x >= 0.0 && y >= 0.0 && self.is_free_px((y / res) as usize, (x / res) as usize)
    }

    pub fn obstacle_count(&self) -> usize {
        self.occupancy.iter().filter(|v| **v == OBSTACLE).count()
    }

    pub fn cell_free(&self, row: usize, col: usize) -> bool {
        self.cell_free[row * self.geometry.cols + col]
    }

    pub fn cell_mask(&self) -> &[bool] {
        &self.cell_free
    }

    /// Valid robot placement. The free rule already demands a free centroid
    /// pixel, so this is `cell_free`.
    pub fn spawnable(&self, row: usize, col: usize) -> bool {
        self.cell_free(row, col)
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let cols = self.geometry.cols;
        (0..self.cell_free.len()).filter(|i| self.cell_free[*i]).map(|i| (i / cols, i % cols)).collect()
    }

    pub fn free_cell_count(&self) -> usize {
        self.cell_free.iter().filter(|f| **f).count()
    }

    /// Centroid in pixel coordinates `(x, y)`.
    pub fn centroid_px(&self, row: usize, col: usize) -> (f64, f64) {
        let cp = self.geometry.cell_px as f64;
        ((col as f64 + 0.5) * cp, (row as f64 + 0.5) * cp)
    }

    /// Whether moving one cell along octant `octant` from `(row, col)` is
    /// unobstructed.
    pub fn can_move(&self, row: usize, col: usize, octant: usize) -> bool {
        self.moves[row * self.geometry.cols + col] & (1 << octant) != 0
    }

    /// Destination of a forward move for `heading`, or `None` when blocked.
    pub fn forward_cell(&self, pose: CellPose) -> Option<(usize, usize)> {
        let o = self.geometry.heading_octant(pose.heading);
        if !self.can_move(pose.row, pose.col, o) {
            return None;
        }
        let (dr, dc) = OCTANT_STEPS[o];
        Some(((pose.row as isize + dr) as usize, (pose.col as isize + dc) as usize))
    }

    /// Grid traversal (Amanatides–Woo) in pixel units from `origin` along the
    /// unit vector `dir`. Returns the distance at which the ray enters the
    /// first obstacle pixel (or leaves the raster), or `None` if that is
    /// farther than `max_dist`. The origin pixel itself is never tested.
    pub fn cast_px(&self, origin: (f64, f64), dir: (f64, f64), max_dist: f64) -> Option<f64> {
        let (w, h) = (self.width() as i64, self.height() as i64);
        let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
        let (dx, dy) = (snap(dir.0), snap(dir.1));
        let (mut px, mut py) = (origin.0.floor() as i64, origin.1.floor() as i64);
        let axis = |o: f64, d: f64, cell: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((cell + 1) as f64 - o) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (o - cell as f64) / -d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, mut t_max_x, delta_x) = axis(origin.0, dx, px);
        let (step_y, mut t_max_y, delta_y) = axis(origin.1, dy, py);
        loop {
            let t = if t_max_x <= t_max_y {
                px += step_x;
                let t = t_max_x;
                t_max_x += delta_x;
                t
            } else {
                py += step_y;
                let t = t_max_y;
                t_max_y += delta_y;
                t
            };
            if t > max_dist {
                return None;
            }
            if px < 0 || py < 0 || px >= w || py >= h {
                return Some(t);
            }
            if self.occupancy[(py * w + px) as usize] == OBSTACLE {
                return Some(t);
            }
        }
    }

    pub(crate) fn with_occupancy(&self, occupancy: Vec<u8>) -> Result<Self> {
        Self::new(occupancy, self.geometry)
    }

    /// Max-pool an obstacle-indicator view down to the coarse grid
    /// (`1.0` where the cell holds any obstacle pixel).
    pub fn coarse_obstacles(&self) -> Vec<f32> {
        let g = self.geometry;
        let mut out = vec![0.0f32; g.rows * g.cols];
        for r in 0..self.height() {
            for c in 0..self.width() {
                if !self.is_free_px(r, c) {
                    out[(r / g.cell_px) * g.cols + c / g.cell_px] = 1.0;
                }
            }
        }
        out
    }

    /// Square crop of `side` pixels centered on a coarse cell centroid.
    /// Out-of-raster pixels are zero (obstacle).
    pub fn crop(&self, row: usize, col: usize, side: usize) -> Vec<u8> {
        let (cx, cy) = self.centroid_px(row, col);
        let (x0, y0) = ((cx - side as f64 / 2.0).floor() as i64, (cy - side as f64 / 2.0).floor() as i64);
        let mut out = vec![OBSTACLE; side * side];
        for r in 0..side {
            for c in 0..side {
                let (pr, pc) = (y0 + r as i64, x0 + c as i64);
                if pr >= 0 && pc >= 0 && self.is_free_px(pr as usize, pc as usize) {
                    out[r * side + c] = FREE;
                }
            }
        }
        out
    }
}
