//! Maze rasterization with randomized obstacle texture, and map-level noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::map::{GridGeometry, GridMap, FREE, OBSTACLE};
use super::maze::CoarseMaze;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, EngineRng};

/// Stochastic morphology: each pass visits every boundary pixel and applies
/// the 3×3 cross operator to it with probability `surface_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphConfig {
    /// Inclusive range the dilation pass count is drawn from.
    pub dilate: (u32, u32),
    /// Inclusive range the erosion pass count is drawn from.
    pub erode: (u32, u32),
    pub surface_prob: f64,
}

impl MorphConfig {
    pub const NONE: MorphConfig = MorphConfig { dilate: (0, 0), erode: (0, 0), surface_prob: 1.0 };

    pub fn is_noop(&self) -> bool {
        self.dilate.1 == 0 && self.erode.1 == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.dilate.0 > self.dilate.1 || self.erode.0 > self.erode.1 {
            return Err(Error::param("morphology pass ranges must be ordered"));
        }
        if !(0.0..=1.0).contains(&self.surface_prob) {
            return Err(Error::param("surface_prob must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self { dilate: (0, 2), erode: (0, 2), surface_prob: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureConfig {
    /// Inclusive wall thickness range, pixels. Must stay below `cell_px`.
    pub thickness: (u32, u32),
    /// Inclusive range for how far a wall end pokes toward an open
    /// neighbor, pixels past half the thickness.
    pub stub: (u32, u32),
    pub morph: MorphConfig,
}

impl TextureConfig {
    /// Fixed-thickness walls, no stubs, no morphology.
    pub fn plain(thickness: u32) -> Self {
        Self { thickness: (thickness, thickness), stub: (0, 0), morph: MorphConfig::NONE }
    }
}

impl Default for TextureConfig {
    fn default() -> Self {
        Self { thickness: (3, 5), stub: (0, 3), morph: MorphConfig::default() }
    }
}

/// Draws the maze on a raster of `geometry`, one coarse cell per maze
/// lattice cell, then textures it.
pub fn rasterize(maze: &CoarseMaze, geometry: GridGeometry, texture: &TextureConfig, seed: u64) -> Result<GridMap> {
    geometry.validate()?;
    if geometry.rows != maze.lattice_rows() || geometry.cols != maze.lattice_cols() {
        return Err(Error::param(format!(
            "geometry {}×{} does not match maze lattice {}×{}",
            geometry.rows,
            geometry.cols,
            maze.lattice_rows(),
            maze.lattice_cols()
        )));
    }
    let cp = geometry.cell_px;
    if texture.thickness.0 == 0 || texture.thickness.0 > texture.thickness.1 {
        return Err(Error::param("thickness range must be ordered and positive"));
    }
    if texture.thickness.1 as usize >= cp {
        return Err(Error::param(format!("wall thickness {} px would seal {} px corridors", texture.thickness.1, cp)));
    }
    if texture.stub.0 > texture.stub.1 {
        return Err(Error::param("stub range must be ordered"));
    }
    texture.morph.validate()?;

    let mut rng = rng_from_seed(seed);
    let (h, w) = (geometry.height_px(), geometry.width_px());
    let mut raster = vec![FREE; h * w];
    let mask = maze.free_mask();
    let (lr, lc) = (geometry.rows, geometry.cols);
    let is_obstacle = |r: isize, c: isize| -> bool {
        r < 0 || c < 0 || r as usize >= lr || c as usize >= lc || !mask[r as usize * lc + c as usize]
    };
    let half_cell = cp as f64 / 2.0;

    for r in 0..lr {
        for c in 0..lc {
            if mask[r * lc + c] {
                continue;
            }
            let half = f64::from(rng.random_range(texture.thickness.0..=texture.thickness.1)) / 2.0;
            let extent = |dr: isize, dc: isize, rng: &mut EngineRng| -> f64 {
                let stub = f64::from(rng.random_range(texture.stub.0..=texture.stub.1));
                if is_obstacle(r as isize + dr, c as isize + dc) {
                    half_cell
                } else {
                    (half + stub).min(half_cell)
                }
            };
            let (west, east) = (extent(0, -1, &mut rng), extent(0, 1, &mut rng));
            let (north, south) = (extent(-1, 0, &mut rng), extent(1, 0, &mut rng));
            let (cx, cy) = ((c as f64 + 0.5) * cp as f64, (r as f64 + 0.5) * cp as f64);
            fill_rect(&mut raster, w, (cx - west, cx + east), (cy - half, cy + half));
            fill_rect(&mut raster, w, (cx - half, cx + half), (cy - north, cy + south));
        }
    }

    apply_morphology(&mut raster, w, h, &texture.morph, &mut rng);

    // wall cells keep an obstacle centroid so eroded remnants never count as
    // free cells
    for r in 0..lr {
        for c in 0..lc {
            if !mask[r * lc + c] {
                let (x, y) = ((c as f64 + 0.5) * cp as f64, (r as f64 + 0.5) * cp as f64);
                raster[y as usize * w + x as usize] = OBSTACLE;
            }
        }
    }

    // every open lattice cell keeps a free centroid
    let radius = cp as f64 / 4.0;
    let mut map = GridMap::new(raster, geometry)?;
    for _ in 0..4 {
        let mut raster = map.occupancy().to_vec();
        let mut touched = false;
        for r in 0..lr {
            for c in 0..lc {
                if mask[r * lc + c] && !map.spawnable(r, c) {
                    let (cx, cy) = map.centroid_px(r, c);
                    clear_disc(&mut raster, w, h, (cx, cy), radius);
                    touched = true;
                }
            }
        }
        if !touched {
            break;
        }
        map = GridMap::new(raster, geometry)?;
    }
    Ok(map)
}

/// Marks pixels whose centers fall in `[x0, x1) × [y0, y1)` as obstacle.
fn fill_rect(raster: &mut [u8], width: usize, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let height = raster.len() / width;
    let lo = |v: f64| (v - 0.5).ceil().max(0.0) as usize;
    let hi = |v: f64, n: usize| ((v - 0.5).ceil().max(0.0) as usize).min(n);
    for r in lo(y0)..hi(y1, height) {
        for c in lo(x0)..hi(x1, width) {
            raster[r * width + c] = OBSTACLE;
        }
    }
}

fn clear_disc(raster: &mut [u8], width: usize, height: usize, (cx, cy): (f64, f64), radius: f64) {
    let r0 = (cy - radius).floor().max(1.0) as usize;
    let c0 = (cx - radius).floor().max(1.0) as usize;
    for r in r0..((cy + radius).ceil() as usize).min(height - 1) {
        for c in c0..((cx + radius).ceil() as usize).min(width - 1) {
            let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
            if (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius {
                raster[r * width + c] = FREE;
            }
        }
    }
}

/// Runs `dilate` then `erode` passes with counts drawn from the config.
pub(crate) fn apply_morphology(
    raster: &mut [u8],
    width: usize,
    height: usize,
    morph: &MorphConfig,
    rng: &mut EngineRng,
) {
    if morph.is_noop() {
        return;
    }
    let dilations = rng.random_range(morph.dilate.0..=morph.dilate.1);
    let erosions = rng.random_range(morph.erode.0..=morph.erode.1);
    for _ in 0..dilations {
        morph_pass(raster, width, height, FREE, morph.surface_prob, rng);
    }
    for _ in 0..erosions {
        morph_pass(raster, width, height, OBSTACLE, morph.surface_prob, rng);
    }
}

/// One cross-element pass: each pixel equal to `target` that touches the
/// other value through a 4-neighbor flips with probability `p`.
fn morph_pass(raster: &mut [u8], width: usize, height: usize, target: u8, p: f64, rng: &mut EngineRng) {
    let before = raster.to_vec();
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if before[i] != target {
                continue;
            }
            let touches = (r > 0 && before[i - width] != target)
                || (r + 1 < height && before[i + width] != target)
                || (c > 0 && before[i - 1] != target)
                || (c + 1 < width && before[i + 1] != target);
            if touches && (p >= 1.0 || rng.random_bool(p)) {
                raster[i] = 1 - target;
            }
        }
    }
}

/// Returns a noisy copy: `flip_count` uniformly drawn pixels (with
/// replacement) are inverted, then morphology is applied. The input is not
/// modified.
pub fn perturb_map(map: &GridMap, flip_count: usize, morph: &MorphConfig, seed: u64) -> Result<GridMap> {
    let (h, w) = (map.height(), map.width());
    if flip_count > h * w {
        return Err(Error::param(format!("cannot flip {flip_count} of {} pixels", h * w)));
    }
    morph.validate()?;
    if flip_count == 0 && morph.is_noop() {
        return Ok(map.clone());
    }
    let mut rng = rng_from_seed(seed);
    let mut raster = map.occupancy().to_vec();
    for _ in 0..flip_count {
        let i = rng.random_range(0..h * w);
        raster[i] = 1 - raster[i];
    }
    apply_morphology(&mut raster, w, h, morph, &mut rng);
    map.with_occupancy(raster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapgen::maze::generate_maze;

    fn geometry_for(maze: &CoarseMaze, cell_px: usize) -> GridGeometry {
        GridGeometry::new(maze.lattice_rows(), maze.lattice_cols(), 4, cell_px, 0.04).unwrap()
    }

    #[test]
    fn plain_walls_keep_free_centroids() {
        let maze = generate_maze(3, 3, 0.0, 5).unwrap();
        let g = geometry_for(&maze, 10);
        let map = rasterize(&maze, g, &TextureConfig::plain(4), 1).unwrap();
        let mask = maze.free_mask();
        for r in 0..g.rows {
            for c in 0..g.cols {
                let open = mask[r * g.cols + c];
                assert_eq!(map.cell_free(r, c), open, "cell ({r},{c})");
                if open {
                    assert!(map.spawnable(r, c));
                }
            }
        }
    }

    #[test]
    fn plain_wall_is_axis_aligned_with_nominal_thickness() {
        let maze = generate_maze(2, 1, 0.0, 0).unwrap();
        let g = geometry_for(&maze, 10);
        let map = rasterize(&maze, g, &TextureConfig::plain(4), 0).unwrap();
        // left wall column of lattice cells: x in [3, 7) px relative to the
        // centroid at 5, so columns 3..=6 are obstacle on every row.
        for row in 1..g.height_px() - 1 {
            for col in 3..7 {
                assert!(!map.is_free_px(row, col), "({row},{col})");
            }
        }
        // room row: free between the side walls, which span columns 23..=26 on the right
        for col in 7..23 {
            assert!(map.is_free_px(15, col), "col {col}");
        }
        assert!(!map.is_free_px(15, 23));
    }

    #[test]
    fn rasterize_is_deterministic() {
        let maze = generate_maze(4, 4, 0.2, 8).unwrap();
        let g = geometry_for(&maze, 10);
        let tex = TextureConfig::default();
        assert_eq!(rasterize(&maze, g, &tex, 3).unwrap(), rasterize(&maze, g, &tex, 3).unwrap());
    }

    #[test]
    fn dilation_adds_obstacles() {
        let maze = generate_maze(3, 3, 0.0, 2).unwrap();
        let g = geometry_for(&maze, 10);
        let base = rasterize(&maze, g, &TextureConfig::plain(3), 4).unwrap();
        let mut tex = TextureConfig::plain(3);
        tex.morph = MorphConfig { dilate: (1, 1), erode: (0, 0), surface_prob: 1.0 };
        let dilated = rasterize(&maze, g, &tex, 4).unwrap();
        assert!(dilated.obstacle_count() > base.obstacle_count());
    }

    #[test]
    fn thick_walls_rejected() {
        let maze = generate_maze(3, 3, 0.0, 2).unwrap();
        let g = geometry_for(&maze, 8);
        assert!(rasterize(&maze, g, &TextureConfig::plain(8), 0).is_err());
    }

    #[test]
    fn connected_open_cells_are_mutually_reachable() {
        let maze = generate_maze(5, 5, 0.25, 17).unwrap();
        let g = geometry_for(&maze, 10);
        let map = rasterize(&maze, g, &TextureConfig::default(), 17).unwrap();
        let cells = map.free_cells();
        let mut seen = vec![false; g.rows * g.cols];
        let (r0, c0) = cells[0];
        let mut stack = vec![(r0, c0)];
        seen[r0 * g.cols + c0] = true;
        while let Some((r, c)) = stack.pop() {
            for o in [0, 2, 4, 6] {
                if let Some(next) = map.forward_cell(crate::grid::CellPose::new(o / 2, r, c)) {
                    if !seen[next.0 * g.cols + next.1] {
                        seen[next.0 * g.cols + next.1] = true;
                        stack.push(next);
                    }
                }
            }
        }
        let mask = maze.free_mask();
        for (i, open) in mask.iter().enumerate() {
            if *open {
                assert!(seen[i], "maze cell {i} unreachable after texturing");
            }
        }
    }

    #[test]
    fn perturb_identity_and_bounds() {
        let maze = generate_maze(5, 5, 0.1, 1).unwrap();
        let g = geometry_for(&maze, 10);
        let map = rasterize(&maze, g, &TextureConfig::default(), 1).unwrap();
        assert_eq!(perturb_map(&map, 0, &MorphConfig::NONE, 9).unwrap(), map);

        let before = map.clone();
        let noisy = perturb_map(&map, 100, &MorphConfig::NONE, 9).unwrap();
        assert_eq!(map, before);
        assert_eq!(noisy.height(), map.height());
        let hamming = map.occupancy().iter().zip(noisy.occupancy()).filter(|(a, b)| a != b).count();
        assert!((1..=100).contains(&hamming), "hamming {hamming}");
        assert_eq!(noisy, perturb_map(&map, 100, &MorphConfig::NONE, 9).unwrap());
    }
}
