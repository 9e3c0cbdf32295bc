//! Wall-clock cost of one likelihood evaluation and one lookahead decision
//! across grid sizes.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filter::{uniform_belief, BeliefGrid, MotionNoise};
use crate::lidar::{raycast, LidarConfig, Scan, ScanMatrix};
use crate::likelihood::{LikelihoodProvider, ScanMatchingProvider};
use crate::mapgen::MapSpec;
use crate::num::Scalar;
use crate::policy::{AmlPolicy, LookaheadConfig};
use crate::pose::ContinuousPose;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub reps: usize,
    pub seed: u64,
    pub beta: f64,
    /// Also time lookahead decisions (much slower on large grids).
    pub aml: bool,
    pub lidar: LidarConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { reps: 10, seed: 0, beta: 100.0, aml: true, lidar: LidarConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub headings: usize,
    pub rows: usize,
    pub cols: usize,
    /// Scalar type of the scan matrix and belief, `f32` or `f64`.
    pub precision: String,
    pub reps: usize,
    /// Mean seconds per scan-matching likelihood.
    pub sm_seconds: f64,
    /// Mean seconds per lookahead decision, when measured.
    pub aml_seconds: Option<f64>,
}

/// Times each `(Θ, N, M)` grid on a freshly generated map with scalar type
/// `T`. One untimed warm-up call precedes each measurement.
pub fn run_benchmark<T: Scalar>(grids: &[(usize, usize, usize)], cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let reps = cfg.reps.max(1);
    grids
        .iter()
        .enumerate()
        .map(|(gi, &(headings, rows, cols))| {
            let map =
                MapSpec::for_grid(rows, cols, headings)?.generate(derive_seed(cfg.seed, "bench-map", gi as u64))?;
            let g = *map.geometry();
            let matrix = Arc::new(ScanMatrix::<T>::build(&map, &cfg.lidar)?);
            let provider = ScanMatchingProvider::new(Arc::clone(&matrix), cfg.beta);
            let cells: Vec<(usize, usize)> =
                map.free_cells().into_iter().filter(|(r, c)| map.spawnable(*r, *c)).collect();
            let mut rng = stream(cfg.seed, "bench-pose", gi as u64);
            let scans: Vec<Scan<T>> = (0..reps + 1)
                .map(|_| {
                    let (r, c) = cells[rng.random_range(0..cells.len())];
                    let (x, y) = g.centroid(r, c);
                    raycast(
                        &map,
                        &ContinuousPose::new(x, y, g.heading_angle(rng.random_range(0..headings))),
                        &cfg.lidar,
                    )
                })
                .collect::<Result<_>>()?;

            std::hint::black_box(provider.likelihood(&scans[0])?);
            let start = Instant::now();
            for s in &scans[1..] {
                std::hint::black_box(provider.likelihood(s)?);
            }
            let sm_seconds = start.elapsed().as_secs_f64() / reps as f64;

            let aml_seconds = if cfg.aml {
                let policy = AmlPolicy::new(LookaheadConfig::new(matrix, cfg.beta, MotionNoise::default()))?;
                let belief: BeliefGrid<T> = uniform_belief(&map)?;
                std::hint::black_box(policy.expected_entropies(&belief, &map)?);
                let start = Instant::now();
                for _ in 0..reps {
                    std::hint::black_box(policy.expected_entropies(&belief, &map)?);
                }
                Some(start.elapsed().as_secs_f64() / reps as f64)
            } else {
                None
            };
            Ok(BenchRow { headings, rows, cols, precision: T::NAME.to_string(), reps, sm_seconds, aml_seconds })
        })
        .collect()
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: &mut W) -> Result<()> {
    writeln!(out, "grid,headings,rows,cols,precision,reps,sm_seconds,aml_seconds")?;
    for r in rows {
        let aml = r.aml_seconds.map_or(String::new(), |s| format!("{s:.6}"));
        writeln!(
            out,
            "{}x{}x{},{},{},{},{},{},{:.6},{}",
            r.headings, r.rows, r.cols, r.headings, r.rows, r.cols, r.precision, r.reps, r.sm_seconds, aml
        )?;
    }
    Ok(())
}
