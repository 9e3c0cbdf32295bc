//! Fixtures and brute-force reference implementations shared by the
//! integration suites. Each `check_*` returns a one-line summary on success.
#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::Arc;

use activeloc::filter::{map_estimate, measurement_update, transition, Action, BeliefGrid, MotionNoise};
use activeloc::grid::{CellPose, Grid3, Shape3};
use activeloc::lidar::{raycast, LidarConfig, Scan, ScanMatrix};
use activeloc::likelihood::{
    cosine_scores, refine_hierarchical, tempered_softmax, FineScanMatchingProvider, HierarchyConfig, Level,
    LikelihoodGrid,
};
use activeloc::mapgen::{GridGeometry, GridMap, MapSpec, FREE, OBSTACLE};
use activeloc::policy::{AmlPolicy, LookaheadConfig};
use activeloc::ContinuousPose;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Map from rows of `#` (wall) and `.` (free) cells, each drawn as a solid
/// `cell_px` block at 0.05 m per pixel.
pub fn ascii_map(rows: &[&str], headings: usize, cell_px: usize) -> GridMap {
    let (n, m) = (rows.len(), rows[0].len());
    let g = GridGeometry::new(n, m, headings, cell_px, 0.05).unwrap();
    let w = g.width_px();
    let mut raster = vec![OBSTACLE; g.height_px() * w];
    for (r, line) in rows.iter().enumerate() {
        assert_eq!(line.len(), m, "ragged fixture");
        for (c, ch) in line.chars().enumerate() {
            if ch == '.' {
                for pr in r * cell_px..(r + 1) * cell_px {
                    raster[pr * w + c * cell_px..pr * w + (c + 1) * cell_px].fill(FREE);
                }
            }
        }
    }
    GridMap::new(raster, g).unwrap()
}

pub const FIXTURES_5X5: [[&str; 5]; 3] = [
    ["#####", "#...#", "#.#.#", "#..##", "#####"],
    ["#####", "#.###", "#...#", "###.#", "#####"],
    ["#####", "#...#", "#...#", "#.#.#", "#####"],
];

/// Nonnegative weights on a random subset of poses, normalized. With
/// `levels > 0` weights are drawn from `1..=levels` so ties are common.
pub fn random_belief(shape: Shape3, rng: &mut ChaCha8Rng, density: f64, levels: u32) -> BeliefGrid<f64> {
    let mut data: Vec<f64> = (0..shape.len())
        .map(|_| {
            if rng.random::<f64>() >= density {
                0.0
            } else if levels > 0 {
                rng.random_range(1..=levels) as f64
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if data.iter().all(|v| *v == 0.0) {
        data[rng.random_range(0..shape.len())] = 1.0;
    }
    let total: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v /= total);
    BeliefGrid::new(Grid3::from_vec(shape, data).unwrap())
}

/// Random belief supported on the free cells of `map`.
pub fn random_free_belief(map: &GridMap, rng: &mut ChaCha8Rng) -> BeliefGrid<f64> {
    let shape = map.geometry().shape();
    let mask = map.cell_mask();
    let mut data: Vec<f64> = (0..shape.len())
        .map(|i| if mask[i % shape.plane()] && rng.random_bool(0.5) { rng.random() } else { 0.0 })
        .collect();
    if data.iter().all(|v| *v == 0.0) {
        let (r, c) = map.free_cells()[0];
        data[r * shape.cols + c] = 1.0;
    }
    let total: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v /= total);
    BeliefGrid::new(Grid3::from_vec(shape, data).unwrap())
}

fn poses(shape: Shape3) -> Vec<CellPose> {
    let mut out = Vec::with_capacity(shape.len());
    for h in 0..shape.headings {
        for r in 0..shape.rows {
            for c in 0..shape.cols {
                out.push(CellPose::new(h, r, c));
            }
        }
    }
    out
}

/// Transport cost from the belief to a point mass, summed over every pair
/// of poses.
pub fn wasserstein_oracle(belief: &BeliefGrid<f64>, truth: CellPose) -> f64 {
    let shape = belief.shape();
    let all = poses(shape);
    let mut total = 0.0;
    for x in &all {
        for y in &all {
            let q = if *y == truth { 1.0 } else { 0.0 };
            let dh = (x.heading as i64 - y.heading as i64).rem_euclid(shape.headings as i64);
            let dh = dh.min(shape.headings as i64 - dh);
            let d = dh + (x.row as i64 - y.row as i64).abs() + (x.col as i64 - y.col as i64).abs();
            total += belief.get(*x) * q * d as f64;
        }
    }
    total
}

/// First pose in `(heading, row, col)` order holding the maximum.
pub fn argmax_oracle(belief: &BeliefGrid<f64>) -> CellPose {
    let mut best = None;
    for p in poses(belief.shape()) {
        let v = belief.get(p);
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((p, v)),
        }
    }
    best.unwrap().0
}

/// Direct-raycast scan model for every pose of a map: forward motion by
/// neighbour lookup, cosine scores and softmax written out longhand.
pub struct BruteForce<'a> {
    map: &'a GridMap,
    shape: Shape3,
    lidar: LidarConfig,
    beta: f64,
    scans: Vec<Option<Vec<f64>>>,
}

impl<'a> BruteForce<'a> {
    pub fn new(map: &'a GridMap, lidar: LidarConfig, beta: f64) -> Self {
        let shape = map.geometry().shape();
        let g = *map.geometry();
        let scans = poses(shape)
            .into_iter()
            .map(|p| {
                if !map.cell_free(p.row, p.col) {
                    return None;
                }
                let (x, y) = g.centroid(p.row, p.col);
                let s: Scan<f64> =
                    raycast(map, &ContinuousPose::new(x, y, g.heading_angle(p.heading)), &lidar).unwrap();
                Some(s.ranges)
            })
            .collect();
        Self { map, shape, lidar, beta, scans }
    }

    fn idx(&self, p: CellPose) -> usize {
        (p.heading * self.shape.rows + p.row) * self.shape.cols + p.col
    }

    /// Four-heading maps only: 0 east, 1 north, 2 west, 3 south.
    pub fn predict(&self, belief: &[f64], action: Action) -> Vec<f64> {
        assert_eq!(self.shape.headings, 4);
        let mut out = vec![0.0; belief.len()];
        for p in poses(self.shape) {
            let v = belief[self.idx(p)];
            if v == 0.0 {
                continue;
            }
            let next = match action {
                Action::Left => CellPose::new((p.heading + 1) % 4, p.row, p.col),
                Action::Right => CellPose::new((p.heading + 3) % 4, p.row, p.col),
                Action::Forward => {
                    let (dr, dc) = [(0, 1), (-1, 0), (0, -1), (1, 0)][p.heading];
                    let (r, c) = (p.row as i64 + dr, p.col as i64 + dc);
                    let inside = r >= 0 && c >= 0 && (r as usize) < self.shape.rows && (c as usize) < self.shape.cols;
                    if inside && self.map.cell_free(r as usize, c as usize) {
                        CellPose::new(p.heading, r as usize, c as usize)
                    } else {
                        p
                    }
                }
            };
            out[self.idx(next)] += v;
        }
        out
    }

    pub fn likelihood_of(&self, truth: CellPose) -> Vec<f64> {
        let cap = self.lidar.max_range;
        let clip = |r: &Vec<f64>| -> Vec<f64> { r.iter().map(|v| v.min(cap)).collect() };
        let z = clip(self.scans[self.idx(truth)].as_ref().expect("truth on a free cell"));
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scores: Vec<f64> = self
            .scans
            .iter()
            .map(|row| match row {
                None => -1.0,
                Some(row) => {
                    let row = clip(row);
                    let rn = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    z.iter().zip(&row).map(|(a, b)| a * b).sum::<f64>() / (zn * rn)
                }
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (self.beta * (s - max)).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }

    pub fn posterior(prior: &[f64], lik: &[f64]) -> Vec<f64> {
        let prod: Vec<f64> = prior.iter().zip(lik).map(|(a, b)| a * b).collect();
        let total: f64 = prod.iter().sum();
        prod.into_iter().map(|v| v / total).collect()
    }

    pub fn entropy(p: &[f64]) -> f64 {
        p.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum()
    }

    /// Expected posterior entropy of each action over every reachable hypothesis.
    pub fn expected_entropies(&self, belief: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, a) in [Action::Left, Action::Right, Action::Forward].into_iter().enumerate() {
            let prior = self.predict(belief, a);
            let (mut num, mut den) = (0.0, 0.0);
            for p in poses(self.shape) {
                let w = prior[self.idx(p)];
                if w > 0.0 {
                    num += w * Self::entropy(&Self::posterior(&prior, &self.likelihood_of(p)));
                    den += w;
                }
            }
            out[k] = num / den;
        }
        out
    }

    pub fn uniform(&self) -> Vec<f64> {
        let free: Vec<bool> = poses(self.shape).into_iter().map(|p| self.map.cell_free(p.row, p.col)).collect();
        let n = free.iter().filter(|f| **f).count() as f64;
        free.into_iter().map(|f| if f { 1.0 / n } else { 0.0 }).collect()
    }

    pub fn free_poses(&self) -> Vec<CellPose> {
        poses(self.shape).into_iter().filter(|p| self.map.cell_free(p.row, p.col)).collect()
    }
}

fn exhaustive_aml(map: &GridMap, lidar: LidarConfig, beta: f64) -> AmlPolicy<f64> {
    let matrix = Arc::new(ScanMatrix::<f64>::build(map, &lidar).unwrap());
    let cfg = LookaheadConfig {
        top_h: map.geometry().shape().len(),
        ..LookaheadConfig::new(matrix, beta, MotionNoise::NONE)
    };
    AmlPolicy::new(cfg).unwrap()
}

/// Exhaustive lookahead against the brute-force reference, for the belief
/// after one noiseless scan from every free pose of each 5×5 fixture.
pub fn check_aml_oracle() -> Check {
    let lidar = LidarConfig::default();
    let beta = 10.0;
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for rows in FIXTURES_5X5 {
        let map = ascii_map(&rows, 4, 10);
        let oracle = BruteForce::new(&map, lidar, beta);
        let policy = exhaustive_aml(&map, lidar, beta);
        let uniform = oracle.uniform();
        for start in oracle.free_poses() {
            let b = BruteForce::posterior(&uniform, &oracle.likelihood_of(start));
            let want = oracle.expected_entropies(&b);
            let belief = BeliefGrid::new(Grid3::from_vec(map.geometry().shape(), b).unwrap());
            let got = policy.expected_entropies(&belief, &map).map_err(|e| e.to_string())?;
            for k in 0..3 {
                let d = (got[k] - want[k]).abs();
                worst = worst.max(d);
                if d > 1e-9 {
                    return Err(format!(
                        "{rows:?} from {start:?}: action {k} entropy {} vs oracle {}",
                        got[k], want[k]
                    ));
                }
            }
            let chosen = activeloc::policy::argmin_action(&got);
            let best = want.iter().cloned().fold(f64::MAX, f64::min);
            if want[chosen.index()] > best + 1e-6 {
                return Err(format!("{rows:?} from {start:?}: chose {chosen:?} with {want:?}"));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} beliefs on 3 fixtures, max |ΔH| = {worst:.1e}"))
}

/// Distance metric against the pairwise oracle on random beliefs and shapes.
pub fn check_wasserstein_oracle(n: usize) -> Check {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let shape = Shape3::new([4, 8][i % 2], r.random_range(1..7), r.random_range(1..7));
        let b = random_belief(shape, &mut r, 0.6, 0);
        let truth = shape.pose(r.random_range(0..shape.len()));
        let d = (activeloc::env::wasserstein(&b, truth) - wasserstein_oracle(&b, truth)).abs();
        worst = worst.max(d);
        if d > 1e-9 {
            return Err(format!("belief {i}: off by {d:e}"));
        }
    }
    Ok(format!("{n} beliefs, max error {worst:.1e}"))
}

pub fn check_map_estimate_oracle(n: usize) -> Check {
    let mut r = rng(12);
    for i in 0..n {
        let shape = Shape3::new(4, r.random_range(1..8), r.random_range(1..8));
        // half the beliefs use coarse weight levels so ties occur
        let b = random_belief(shape, &mut r, 0.7, if i % 2 == 0 { 3 } else { 0 });
        let (got, want) = (map_estimate(&b), argmax_oracle(&b));
        if got != want {
            return Err(format!("belief {i}: {got:?} vs {want:?}"));
        }
    }
    Ok(format!("{n} beliefs"))
}

fn fuzz_maps() -> Vec<GridMap> {
    let mut maps: Vec<GridMap> = FIXTURES_5X5.iter().map(|f| ascii_map(f, 4, 10)).collect();
    maps.push(MapSpec::for_grid(7, 7, 4).unwrap().generate(5).unwrap());
    maps.push(MapSpec::for_grid(5, 5, 8).unwrap().generate(6).unwrap());
    maps
}

/// `calls` random transitions and updates; every result must sum to one.
pub fn check_mass_conservation(calls: usize) -> Check {
    let maps = fuzz_maps();
    let mut r = rng(13);
    let mut worst: f64 = 0.0;
    for i in 0..calls {
        let map = &maps[i % maps.len()];
        let shape = map.geometry().shape();
        let belief = random_free_belief(map, &mut r);
        let out = if r.random_bool(0.5) {
            let noise = MotionNoise {
                sigma_heading: r.random_range(0.0..1.0),
                sigma_row: r.random_range(0.0..1.0),
                sigma_col: r.random_range(0.0..1.0),
                slip_prob: r.random_range(0.0..0.5),
            };
            let a = Action::ALL[r.random_range(0..3)];
            transition(&belief, a, &noise, map).map_err(|e| e.to_string())?
        } else {
            let scores: Vec<f64> = (0..shape.len()).map(|_| r.random_range(-1.0..1.0)).collect();
            let lik =
                tempered_softmax(&Grid3::from_vec(shape, scores).unwrap(), r.random_range(0.1..100.0), Level::Coarse)
                    .map_err(|e| e.to_string())?;
            measurement_update(&belief, &lik).map_err(|e| e.to_string())?.belief
        };
        let d = (out.sum() - 1.0).abs();
        worst = worst.max(d);
        if d > 1e-9 || out.as_slice().iter().any(|v| *v < 0.0) {
            return Err(format!("call {i}: mass off by {d:e}"));
        }
    }
    Ok(format!("{calls} calls, max |Σ−1| = {worst:.1e}"))
}

pub fn check_left_right_identity(n: usize) -> Check {
    let maps = fuzz_maps();
    let mut r = rng(14);
    for i in 0..n {
        let map = &maps[i % maps.len()];
        let b = random_free_belief(map, &mut r);
        for (first, second) in [(Action::Left, Action::Right), (Action::Right, Action::Left)] {
            let once = transition(&b, first, &MotionNoise::NONE, map).map_err(|e| e.to_string())?;
            let back = transition(&once, second, &MotionNoise::NONE, map).map_err(|e| e.to_string())?;
            let d = back.as_slice().iter().zip(b.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d > 1e-15 {
                return Err(format!("belief {i}: {first:?} then {second:?} off by {d:e}"));
            }
        }
    }
    Ok(format!("{n} beliefs"))
}

pub const CORRIDOR: [&str; 4] = ["############", "#..........#", "#######.####", "############"];

/// Every free pose whose forward neighbour is a wall keeps its mass under
/// `Forward`; every other pose moves one cell.
pub fn check_blocked_forward() -> Check {
    let mut blocked = 0;
    for rows in [&CORRIDOR[..], &FIXTURES_5X5[0][..]] {
        let map = ascii_map(rows, 4, 10);
        let oracle = BruteForce::new(&map, LidarConfig::default(), 1.0);
        let shape = map.geometry().shape();
        for p in oracle.free_poses() {
            let b = BeliefGrid::<f64>::one_hot(shape, p);
            let got = transition(&b, Action::Forward, &MotionNoise::NONE, &map).map_err(|e| e.to_string())?;
            let want = oracle.predict(b.as_slice(), Action::Forward);
            if got.as_slice() != want.as_slice() {
                return Err(format!("{p:?}: forward moved to {:?}", map_estimate(&got)));
            }
            blocked += usize::from(got.as_slice() == b.as_slice());
        }
    }
    if blocked == 0 {
        return Err("fixtures contain no blocked pose".into());
    }
    Ok(format!("{blocked} blocked poses keep their mass"))
}

/// The likelihood argmax is the score argmax for every temperature.
pub fn check_softmax_argmax(n: usize) -> Check {
    let mut r = rng(15);
    let map = MapSpec::for_grid(7, 7, 4).unwrap().generate(3).unwrap();
    let matrix = ScanMatrix::<f64>::build(&map, &LidarConfig::default()).unwrap();
    let free = map.free_cells();
    for i in 0..n {
        let scores = if i % 2 == 0 {
            let shape = Shape3::new(4, r.random_range(1..6), r.random_range(2..6));
            Grid3::from_vec(shape, (0..shape.len()).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
        } else {
            let (row, col) = free[r.random_range(0..free.len())];
            cosine_scores(&matrix, &matrix.scan(CellPose::new(r.random_range(0..4), row, col))).unwrap()
        };
        let want = scores.argmax();
        for beta in [0.1, 1.0, 10.0, 1000.0] {
            let l = tempered_softmax(&scores, beta, Level::Coarse).map_err(|e| e.to_string())?;
            if l.values.argmax() != want {
                return Err(format!("grid {i}, β = {beta}: argmax moved"));
            }
        }
    }
    Ok(format!("{n} score grids × 4 temperatures"))
}

/// `k = 3`, `c = 2` on random 4×4 coarse likelihoods: total mass one and
/// every `k × k` block summing to its coarse value.
pub fn check_refinement(n: usize) -> Check {
    let map = Arc::new(ascii_map(&["....", "..#.", "....", ".#.."], 4, 12));
    let lidar = LidarConfig { beams: 90, ..LidarConfig::default() };
    let provider = FineScanMatchingProvider::new(Arc::clone(&map), lidar, 20.0);
    let cfg = HierarchyConfig { c: 2, k: 3, crop_px: 32 };
    let shape = map.geometry().shape();
    let g = *map.geometry();
    let mut r = rng(16);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let data: Vec<f64> = (0..shape.len()).map(|_| r.random::<f64>()).collect();
        let total: f64 = data.iter().sum();
        let coarse = LikelihoodGrid {
            values: Grid3::from_vec(shape, data.into_iter().map(|v| v / total).collect()).unwrap(),
            level: Level::Coarse,
            beta: 1.0,
        };
        let (row, col) = map.free_cells()[r.random_range(0..map.free_cell_count())];
        let (x, y) = g.centroid(row, col);
        let scan: Scan<f64> = raycast(&map, &ContinuousPose::new(x, y, r.random_range(0.0..TAU)), &lidar).unwrap();
        let fine = refine_hierarchical(&coarse, &map, &scan, &cfg, &provider).map_err(|e| e.to_string())?;
        worst = worst.max((fine.values.sum() - 1.0).abs());
        for p in poses(shape) {
            let mut block = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    block += fine.values.get(CellPose::new(p.heading, p.row * 3 + a, p.col * 3 + b));
                }
            }
            worst = worst.max((block - coarse.values.get(p)).abs());
        }
        if worst > 1e-9 {
            return Err(format!("grid {i}: marginal off by {worst:e}"));
        }
    }
    Ok(format!("{n} grids, max marginal error {worst:.1e}"))
}
