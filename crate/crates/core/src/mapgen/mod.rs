//! Random maze environments and their occupancy rasters.

mod map;
mod maze;
mod pgm;
mod raster;

pub use map::{GridGeometry, GridMap, FREE, OBSTACLE, OCTANT_STEPS};
pub use maze::{generate_maze, CoarseMaze};
pub use pgm::{decode_pgm, encode_pgm, read_map, sidecar_path, write_map, MapMeta};
pub use raster::{perturb_map, rasterize, MorphConfig, TextureConfig};

#[cfg(test)]
pub(crate) use map::tests::open_room;

use crate::error::Result;

/// Raster side generated maps aim for.
pub const TARGET_SIDE_PX: usize = 224;

/// Maze + raster in one call for a `(2·rooms+1)`-cell square grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MapSpec {
    pub rooms_rows: usize,
    pub rooms_cols: usize,
    pub headings: usize,
    pub cell_px: usize,
    pub resolution: f64,
    pub prune_prob: f64,
    pub texture: TextureConfig,
}

impl MapSpec {
    /// Spec for a coarse grid of `rows × cols` cells; both must be odd. Cells
    /// are sized so the longer raster side lands near [`TARGET_SIDE_PX`].
    pub fn for_grid(rows: usize, cols: usize, headings: usize) -> crate::Result<Self> {
        if rows.is_multiple_of(2) || cols.is_multiple_of(2) || rows < 3 || cols < 3 {
            return Err(crate::Error::Parameter(format!(
                "generated maps need odd coarse dimensions ≥ 3, got {rows}×{cols}"
            )));
        }
        let base = Self::default();
        let min_px = base.texture.thickness.1 as usize + 2;
        let cell_px = (TARGET_SIDE_PX as f64 / rows.max(cols) as f64).round() as usize;
        Ok(Self { rooms_rows: rows / 2, rooms_cols: cols / 2, headings, cell_px: cell_px.max(min_px), ..base })
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(
            2 * self.rooms_rows + 1,
            2 * self.rooms_cols + 1,
            self.headings,
            self.cell_px,
            self.resolution,
        )
    }

    pub fn generate(&self, seed: u64) -> Result<GridMap> {
        let maze = generate_maze(self.rooms_rows, self.rooms_cols, self.prune_prob, seed)?;
        rasterize(&maze, self.geometry()?, &self.texture, crate::rng::derive_seed(seed, "texture", 0))
    }
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            rooms_rows: 5,
            rooms_cols: 5,
            headings: 4,
            cell_px: 20,
            resolution: 0.04,
            prune_prob: 0.25,
            texture: TextureConfig::default(),
        }
    }
}
