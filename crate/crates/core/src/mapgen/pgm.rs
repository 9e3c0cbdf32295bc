//! PGM (P5) map files with a JSON sidecar carrying the grid geometry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::map::{GridGeometry, GridMap, OBSTACLE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub resolution: f64,
    #[serde(rename = "N")]
    pub rows: usize,
    #[serde(rename = "M")]
    pub cols: usize,
    #[serde(rename = "Theta")]
    pub headings: usize,
    pub cell_px: usize,
    pub seed: u64,
}

impl MapMeta {
    pub fn new(geometry: &GridGeometry, seed: u64) -> Self {
        Self {
            resolution: geometry.resolution,
            rows: geometry.rows,
            cols: geometry.cols,
            headings: geometry.headings,
            cell_px: geometry.cell_px,
            seed,
        }
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.rows, self.cols, self.headings, self.cell_px, self.resolution)
    }
}

/// Sidecar path: `foo.pgm` → `foo.json`.
pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

/// P5 bytes with `0 = obstacle` and `255 = free`.
pub fn encode_pgm(width: usize, height: usize, raster: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(raster.iter().map(|v| if *v == OBSTACLE { 0u8 } else { 255u8 }));
    out
}

/// Parses a binary PGM. Returns `(width, height, pixels scaled to 0..=255)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(Error::Format("not a binary (P5) PGM".into()));
    }
    let parse = |s: String| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field {s:?}")));
    let width = parse(token()?)?;
    let height = parse(token()?)?;
    let maxval = parse(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    // a single whitespace byte separates the header from the payload
    let start = pos + 1;
    let payload =
        bytes.get(start..start + width * height).ok_or_else(|| Error::Format("truncated PGM payload".into()))?;
    let scaled = payload.iter().map(|v| ((*v as usize * 255) / maxval) as u8).collect();
    Ok((width, height, scaled))
}

/// Writes `<path>` (PGM) and its JSON sidecar.
pub fn write_map(map: &GridMap, path: &Path, seed: u64) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, encode_pgm(map.width(), map.height(), map.occupancy()))?;
    let meta = MapMeta::new(map.geometry(), seed);
    let mut f = fs::File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(&mut f, &meta)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Reads a PGM + sidecar pair, validating raster size against the geometry.
/// Pixels brighter than mid-gray count as free.
pub fn read_map(path: &Path) -> Result<(GridMap, MapMeta)> {
    let (width, height, pixels) = decode_pgm(&fs::read(path)?)?;
    let meta: MapMeta = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let geometry = meta.geometry()?;
    if height != geometry.height_px() || width != geometry.width_px() {
        return Err(Error::Map(format!(
            "{}: {width}×{height} px is not {}×{} cells of {} px",
            path.display(),
            geometry.cols,
            geometry.rows,
            geometry.cell_px
        )));
    }
    let occupancy = pixels.into_iter().map(|v| u8::from(v > 127)).collect();
    Ok((GridMap::new(occupancy, geometry)?, meta))
}
