//! Training-data export: `(map, scan image, likelihood)` triplets.
//!
//! Layout under the output directory:
//!
//! ```text
//! maps/<id>.pgm, maps/<id>.json      true map and its geometry
//! samples/<id>/<k>.scan              ranges, little-endian f32
//! samples/<id>/<k>.lik               Θ×N×M likelihood, little-endian f32
//! samples/<id>/<k>.map.pgm           the map as given to the model
//! samples/<id>/<k>.img.pgm           robot-centric scan image
//! manifest.jsonl                     one line per sample
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::CellPose;
use crate::lidar::{corrupt_scan_with, raycast, scan_to_image, LidarConfig, Scan, ScanMatrix, ScanNoise};
use crate::likelihood::{cosine_scores, tempered_softmax, Level};
use crate::mapgen::{encode_pgm, perturb_map, write_map, MapSpec, MorphConfig};
use crate::pose::ContinuousPose;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainRandomization {
    pub enabled: bool,
    pub scan: ScanNoise,
    /// Maximum spawn offset from the centroid, as a fraction of half the cell pitch.
    pub pose_offset: f64,
    /// Softmax temperature range sampled per sample.
    pub beta_range: (f64, f64),
    pub map_flips: usize,
    pub map_morph: MorphConfig,
}

impl DomainRandomization {
    pub const OFF: DomainRandomization = DomainRandomization {
        enabled: false,
        scan: ScanNoise::NONE,
        pose_offset: 0.0,
        beta_range: (1.0, 1.0),
        map_flips: 0,
        map_morph: MorphConfig::NONE,
    };
}

impl Default for DomainRandomization {
    fn default() -> Self {
        Self {
            enabled: true,
            scan: ScanNoise { sigma: 0.02, dropout: 0.02, rot_jitter_deg: 2.0 },
            pose_offset: 0.5,
            beta_range: (0.1, 1.0),
            map_flips: 100,
            map_morph: MorphConfig { dilate: (0, 1), erode: (0, 1), surface_prob: 0.5 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_maps: usize,
    pub poses_per_map: usize,
    pub map_spec: MapSpec,
    pub lidar: LidarConfig,
    pub dr: DomainRandomization,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_maps: 1,
            poses_per_map: 10,
            map_spec: MapSpec::default(),
            lidar: LidarConfig::default(),
            dr: DomainRandomization::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub map_id: String,
    pub sample: usize,
    pub map_seed: u64,
    pub sample_seed: u64,
    pub pose: ContinuousPose,
    pub cell: CellPose,
    pub beta: f64,
    /// `[Θ, N, M]` of the likelihood tensor.
    pub shape: [usize; 3],
    pub beams: usize,
    /// Most likely pose under the exported likelihood.
    pub argmax: CellPose,
    pub scan: String,
    pub likelihood: String,
    pub map: String,
    pub image: String,
}

fn f32_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}

/// Generates the dataset. On failure the manifest is removed so a partial
/// run is never mistaken for a complete one.
pub fn generate_dataset(cfg: &DatasetConfig, out: &Path) -> Result<Vec<ManifestEntry>> {
    let manifest_path = out.join("manifest.jsonl");
    let result = write_dataset(cfg, out, &manifest_path);
    if result.is_err() {
        let _ = fs::remove_file(&manifest_path);
    }
    result
}

fn write_dataset(cfg: &DatasetConfig, out: &Path, manifest_path: &Path) -> Result<Vec<ManifestEntry>> {
    cfg.lidar.validate()?;
    fs::create_dir_all(out.join("maps"))?;
    fs::create_dir_all(out.join("samples"))?;
    let mut manifest = fs::File::create(manifest_path)?;
    let mut entries = Vec::new();
    let dr = if cfg.dr.enabled { cfg.dr } else { DomainRandomization::OFF };
    for i in 0..cfg.n_maps {
        let map_id = format!("{i:05}");
        let map_seed = derive_seed(cfg.seed, "map", i as u64);
        let map = cfg.map_spec.generate(map_seed)?;
        write_map(&map, &out.join("maps").join(format!("{map_id}.pgm")), map_seed)?;
        let matrix = ScanMatrix::<f64>::build(&map, &cfg.lidar)?;
        let g = *map.geometry();
        let spawn_cells: Vec<(usize, usize)> =
            map.free_cells().into_iter().filter(|(r, c)| map.spawnable(*r, *c)).collect();
        if spawn_cells.is_empty() {
            return Err(crate::Error::Map(format!("map {map_id} has no free cell to spawn in")));
        }
        let dir = out.join("samples").join(&map_id);
        fs::create_dir_all(&dir)?;
        for k in 0..cfg.poses_per_map {
            let sample_seed = derive_seed(map_seed, "sample", k as u64);
            let mut rng = stream(sample_seed, "pose", 0);
            let (r, c) = spawn_cells[rng.random_range(0..spawn_cells.len())];
            let heading = rng.random_range(0..g.headings);
            let (mut x, mut y) = g.centroid(r, c);
            let off = dr.pose_offset * g.l_m() / 2.0;
            if off > 0.0 {
                let (dx, dy) = (rng.random_range(-off..=off), rng.random_range(-off..=off));
                if map.is_free_point(x + dx, y + dy) && g.cell_of(x + dx, y + dy) == Some((r, c)) {
                    x += dx;
                    y += dy;
                }
            }
            let pose = ContinuousPose::new(x, y, g.heading_angle(heading));
            let clean: Scan<f64> = raycast(&map, &pose, &cfg.lidar)?;
            let scan = corrupt_scan_with(&clean, &dr.scan, &mut stream(sample_seed, "scan", 0))?;
            let beta = if dr.beta_range.0 < dr.beta_range.1 {
                rng.random_range(dr.beta_range.0..=dr.beta_range.1)
            } else {
                dr.beta_range.0
            };
            let lik = tempered_softmax(&cosine_scores(&matrix, &scan)?, beta, Level::Coarse)?;
            let model_map = if dr.map_flips > 0 || !dr.map_morph.is_noop() {
                perturb_map(&map, dr.map_flips, &dr.map_morph, derive_seed(sample_seed, "map", 0))?
            } else {
                map.clone()
            };
            let image = scan_to_image(&scan, &g);

            let stem = |ext: &str| format!("samples/{map_id}/{k}.{ext}");
            let entry = ManifestEntry {
                map_id: map_id.clone(),
                sample: k,
                map_seed,
                sample_seed,
                pose,
                cell: CellPose::new(heading, r, c),
                beta,
                shape: g.shape().as_array(),
                beams: cfg.lidar.beams,
                argmax: lik.values.argmax(),
                scan: stem("scan"),
                likelihood: stem("lik"),
                map: stem("map.pgm"),
                image: stem("img.pgm"),
            };
            fs::write(out.join(&entry.scan), f32_bytes(scan.ranges.iter().copied()))?;
            fs::write(out.join(&entry.likelihood), f32_bytes(lik.values.as_slice().iter().copied()))?;
            fs::write(out.join(&entry.map), encode_pgm(model_map.width(), model_map.height(), model_map.occupancy()))?;
            fs::write(out.join(&entry.image), encode_pgm(image.width, image.height, &image.raster))?;
            serde_json::to_writer(&mut manifest, &entry)?;
            manifest.write_all(b"\n")?;
            entries.push(entry);
        }
    }
    manifest.flush()?;
    Ok(entries)
}
