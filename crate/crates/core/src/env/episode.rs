//! Episodic simulation: a continuous robot on the true map and a grid Bayes
//! filter running on the (possibly perturbed) filter map.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::EpisodeConfig;
use super::metrics::{reward, StepMetrics, Visited};
use crate::error::{Error, Result};
use crate::filter::{map_estimate, measurement_update, transition, uniform_belief, Action, BeliefGrid};
use crate::grid::CellPose;
use crate::lidar::{corrupt_scan_with, raycast, scan_to_image, Scan, ScanMatrix};
use crate::likelihood::{
    fine_block, BlockProvider, FineScanMatchingProvider, LikelihoodProvider, ScanMatchingProvider,
};
use crate::mapgen::{perturb_map, GridMap};
use crate::num::Scalar;
use crate::pose::ContinuousPose;
use crate::rng::{derive_seed, stream, EngineRng};

/// What the agent receives after `reset` and every `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub belief: BeliefGrid<T>,
    /// Coarse obstacle map of the filter map, `N × M`.
    pub map_low: Vec<f32>,
    /// Coarse robot-centric scan-endpoint image, `N × M`.
    pub scan_low: Vec<f32>,
    /// The corrupted scan fed to the filter.
    pub scan: Scan<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub metrics: StepMetrics,
    pub pose: ContinuousPose,
    /// The requested translation was obstructed and not executed.
    pub blocked: bool,
    /// Estimated within-cell offset `(dx, dy)` in meters used for this
    /// step's command, when drift correction ran.
    pub drift: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub observation: Observation<T>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct EpisodeState<T> {
    pub seed: u64,
    pub pose: ContinuousPose,
    /// Heading index the robot's own odometry tracks: the spawn heading plus
    /// every commanded turn. The true heading jitters around it.
    pub commanded_heading: usize,
    pub belief: BeliefGrid<T>,
    pub step: usize,
    pub metrics: StepMetrics,
    pub visited: Visited,
    pub last_scan: Scan<T>,
    pub degenerate_updates: usize,
    motion_rng: EngineRng,
    sensor_rng: EngineRng,
}

pub struct Environment<T: Scalar> {
    truth: Arc<GridMap>,
    filter_map: Arc<GridMap>,
    config: EpisodeConfig,
    matrix: Arc<ScanMatrix<T>>,
    likelihood: Arc<dyn LikelihoodProvider<T>>,
    fine: Arc<dyn BlockProvider<T>>,
    map_low: Vec<f32>,
    state: Option<EpisodeState<T>>,
}

impl<T: Scalar> Environment<T> {
    /// Builds the filter's copy of `truth` (perturbed per the noise settings,
    /// seeded by `map_seed`) and its scan matrix.
    pub fn new(truth: GridMap, config: EpisodeConfig, map_seed: u64) -> Result<Self> {
        config.validate()?;
        let truth = Arc::new(truth);
        let n = &config.noise;
        let filter_map = if n.map_flips > 0 || !n.map_morph.is_noop() {
            Arc::new(perturb_map(&truth, n.map_flips, &n.map_morph, derive_seed(map_seed, "filter-map", 0))?)
        } else {
            Arc::clone(&truth)
        };
        let matrix = Arc::new(ScanMatrix::build(&filter_map, &config.lidar)?);
        Ok(Self::assemble(truth, filter_map, matrix, config))
    }

    /// Uses a prebuilt scan matrix of `filter_map`.
    pub fn with_parts(
        truth: Arc<GridMap>,
        filter_map: Arc<GridMap>,
        matrix: Arc<ScanMatrix<T>>,
        config: EpisodeConfig,
    ) -> Result<Self> {
        config.validate()?;
        if truth.geometry() != filter_map.geometry() || matrix.shape() != filter_map.geometry().shape() {
            return Err(Error::param("truth map, filter map and scan matrix disagree on geometry"));
        }
        Ok(Self::assemble(truth, filter_map, matrix, config))
    }

    fn assemble(
        truth: Arc<GridMap>,
        filter_map: Arc<GridMap>,
        matrix: Arc<ScanMatrix<T>>,
        config: EpisodeConfig,
    ) -> Self {
        let likelihood = Arc::new(ScanMatchingProvider::new(Arc::clone(&matrix), config.beta));
        let fine = Arc::new(FineScanMatchingProvider::new(Arc::clone(&filter_map), config.lidar, config.beta));
        let map_low = filter_map.coarse_obstacles();
        Self { truth, filter_map, config, matrix, likelihood, fine, map_low, state: None }
    }

    /// Replaces the coarse likelihood model.
    pub fn with_likelihood(mut self, provider: Arc<dyn LikelihoodProvider<T>>) -> Result<Self> {
        if provider.shape() != self.filter_map.geometry().shape() {
            return Err(Error::param("likelihood provider shape does not match the map grid"));
        }
        self.likelihood = provider;
        Ok(self)
    }

    /// Replaces the fine-level model used for drift correction.
    pub fn with_fine_provider(mut self, provider: Arc<dyn BlockProvider<T>>) -> Self {
        self.fine = provider;
        self
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn likelihood_provider(&self) -> &Arc<dyn LikelihoodProvider<T>> {
        &self.likelihood
    }

    pub fn fine_provider(&self) -> &Arc<dyn BlockProvider<T>> {
        &self.fine
    }

    pub fn truth_map(&self) -> &Arc<GridMap> {
        &self.truth
    }

    pub fn filter_map(&self) -> &Arc<GridMap> {
        &self.filter_map
    }

    pub fn matrix(&self) -> &Arc<ScanMatrix<T>> {
        &self.matrix
    }

    pub fn map_low(&self) -> &[f32] {
        &self.map_low
    }

    pub fn state(&self) -> Option<&EpisodeState<T>> {
        self.state.as_ref()
    }

    /// True pose snapped to the nearest centroid and heading.
    pub fn true_cell(&self, pose: &ContinuousPose) -> CellPose {
        let g = self.truth.geometry();
        g.snap(pose.x, pose.y, pose.heading).unwrap_or(CellPose::new(g.heading_index(pose.heading), 0, 0))
    }

    /// Starts an episode: uniform random spawn, uniform belief, first update.
    pub fn reset(&mut self, seed: u64) -> Result<Observation<T>> {
        let g = *self.truth.geometry();
        let cells: Vec<(usize, usize)> = self
            .truth
            .free_cells()
            .into_iter()
            .filter(|(r, c)| self.truth.spawnable(*r, *c) && self.filter_map.cell_free(*r, *c))
            .collect();
        if cells.is_empty() {
            return Err(Error::Map("no free cell to spawn in".into()));
        }
        let mut spawn = stream(seed, "spawn", 0);
        let (r, c) = cells[spawn.random_range(0..cells.len())];
        let heading = spawn.random_range(0..g.headings);
        let (mut x, mut y) = g.centroid(r, c);
        let off = self.config.noise.spawn_offset * g.l_m() / 2.0;
        if off > 0.0 {
            let (dx, dy) = (spawn.random_range(-off..=off), spawn.random_range(-off..=off));
            if self.truth.is_free_point(x + dx, y + dy) && g.cell_of(x + dx, y + dy) == Some((r, c)) {
                x += dx;
                y += dy;
            }
        }
        let pose = ContinuousPose::new(x, y, g.heading_angle(heading));
        let prior = uniform_belief(&self.filter_map)?;
        let mut state = EpisodeState {
            seed,
            pose,
            commanded_heading: heading,
            belief: prior.clone(),
            step: 0,
            metrics: StepMetrics::compute(0, &prior, self.true_cell(&pose), false),
            visited: Visited::default(),
            last_scan: Scan { ranges: Vec::new(), config: self.config.lidar },
            degenerate_updates: 0,
            motion_rng: stream(seed, "motion", 0),
            sensor_rng: stream(seed, "sensor", 0),
        };
        let degenerate = self.sense(&mut state, &prior)?;
        state.metrics = StepMetrics::compute(0, &state.belief, self.true_cell(&pose), degenerate);
        state.visited.believed.insert(state.metrics.estimate);
        state.visited.true_poses.insert(state.metrics.truth);
        let obs = self.observe(&state);
        self.state = Some(state);
        Ok(obs)
    }

    /// Takes a scan at the true pose, corrupts it and updates the belief from
    /// `prior`. Returns whether the update degenerated.
    fn sense(&self, state: &mut EpisodeState<T>, prior: &BeliefGrid<T>) -> Result<bool> {
        let clean: Scan<T> = raycast(&self.truth, &state.pose, &self.config.lidar)?;
        let scan = corrupt_scan_with(&clean, &self.config.noise.scan, &mut state.sensor_rng)?;
        let lik = self.likelihood.likelihood(&scan)?;
        let post = measurement_update(prior, &lik)?;
        state.belief = post.belief;
        state.last_scan = scan;
        if post.degenerate {
            state.degenerate_updates += 1;
        }
        Ok(post.degenerate)
    }

    fn observe(&self, state: &EpisodeState<T>) -> Observation<T> {
        let g = self.filter_map.geometry();
        Observation {
            belief: state.belief.clone(),
            map_low: self.map_low.clone(),
            scan_low: scan_to_image(&state.last_scan, g).pooled(g.cell_px),
            scan: state.last_scan.clone(),
        }
    }

    /// Within-cell position estimate for the believed cell: the posterior
    /// mean of the fine sub-cell centroids.
    fn estimate_position(&self, state: &EpisodeState<T>, cell: CellPose) -> Result<Option<(f64, f64)>> {
        let every = self.config.drift_every;
        if every == 0 || !state.step.is_multiple_of(every) || state.belief.get(cell).f64() < self.config.drift_min_mass
        {
            return Ok(None);
        }
        let h = &self.config.hierarchy;
        // posterior mean over the sub-cells; a near-tie between two sub-cells
        // then lands between them instead of on one of them
        let block = fine_block(&self.filter_map, &state.last_scan, cell, h, self.fine.as_ref())?;
        let (mut x, mut y, mut total) = (0.0, 0.0, 0.0);
        for (i, v) in block.iter().enumerate() {
            let w = v.f64();
            let (sx, sy) = FineScanMatchingProvider::sub_centroid(&self.filter_map, cell, h.k, i / h.k, i % h.k);
            x += w * sx;
            y += w * sy;
            total += w;
        }
        if total <= 0.0 {
            return Ok(None);
        }
        // offsets below the deadband are within the fine level's resolution
        // and are treated as zero
        let (cx, cy) = self.filter_map.geometry().centroid(cell.row, cell.col);
        let band = self.config.drift_deadband * self.filter_map.geometry().l_m() / h.k as f64;
        let snap = |v: f64, c: f64| if (v - c).abs() < band { c } else { v };
        Ok(Some((snap(x / total, cx), snap(y / total, cy))))
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome<T>> {
        let mut state = self.state.take().ok_or(Error::NoEpisode)?;
        if state.step >= self.config.horizon {
            self.state = Some(state);
            return Err(Error::EpisodeFinished);
        }
        let result = self.advance(&mut state, action);
        self.state = Some(state);
        result
    }

    fn advance(&self, state: &mut EpisodeState<T>, action: Action) -> Result<StepOutcome<T>> {
        let g = *self.filter_map.geometry();
        let believed = map_estimate(&state.belief);
        let centroid = g.centroid(believed.row, believed.col);
        let estimate = self.estimate_position(state, believed)?;
        let from = estimate.unwrap_or(centroid);
        let drift = estimate.map(|(x, y)| (x - centroid.0, y - centroid.1));

        let goal = match action {
            Action::Forward => match self.filter_map.forward_cell(believed) {
                Some((r, c)) => g.centroid(r, c),
                None => centroid,
            },
            Action::Left | Action::Right => centroid,
        };

        // command in the robot frame, relative to the believed heading
        let believed_heading = g.heading_angle(believed.heading);
        let (cx, cy) = (goal.0 - from.0, -(goal.1 - from.1));
        let rel = (state.pose.heading - believed_heading + PI).rem_euclid(TAU) - PI;
        // headings that agree up to rounding must not nudge an axis-aligned
        // path onto a neighboring pixel column
        let nominal = if rel.abs() < 1e-9 {
            (cx, cy)
        } else {
            let (s, c) = rel.sin_cos();
            (c * cx - s * cy, s * cx + c * cy)
        };

        let n = self.config.noise;
        let rng = &mut state.motion_rng;
        let eps: f64 = rng.sample(StandardNormal);
        let eta_t: f64 = rng.sample(StandardNormal);
        let eta_h: f64 = rng.sample(StandardNormal);

        let blocked = self.obstructed(&state.pose, nominal);
        if !blocked {
            let scale = 1.0 + n.actuation_scale * eps;
            let (s, c) = (n.actuation_heading_deg.to_radians() * eta_t).sin_cos();
            let noisy = (scale * (c * nominal.0 - s * nominal.1), scale * (s * nominal.0 + c * nominal.1));
            state.pose = self.execute(&state.pose, noisy);
        }
        state.commanded_heading =
            (state.commanded_heading as isize + action.turn()).rem_euclid(g.headings as isize) as usize;
        state.pose.heading =
            (g.heading_angle(state.commanded_heading) + n.actuation_heading_deg.to_radians() * eta_h).rem_euclid(TAU);

        let prior = transition(&state.belief, action, &n.motion, &self.filter_map)?;
        let degenerate = self.sense(state, &prior)?;
        state.step += 1;
        let metrics = StepMetrics::compute(state.step, &state.belief, self.true_cell(&state.pose), degenerate);
        let r = reward(self.config.reward, &state.metrics, &metrics, &mut state.visited);
        state.metrics = metrics;
        Ok(StepOutcome {
            observation: self.observe(state),
            reward: r,
            done: state.step == self.config.horizon,
            info: StepInfo { metrics, pose: state.pose, blocked, drift },
        })
    }

    /// A translation `(dx, dy_up)` in meters is obstructed when the straight
    /// path crosses an obstacle pixel or ends outside a free cell.
    fn obstructed(&self, pose: &ContinuousPose, delta: (f64, f64)) -> bool {
        let len = delta.0.hypot(delta.1);
        if len < 1e-9 {
            return false;
        }
        let (tx, ty) = (pose.x + delta.0, pose.y - delta.1);
        let Some((r, c)) = self.truth.geometry().cell_of(tx, ty) else {
            return true;
        };
        if !self.truth.cell_free(r, c) || !self.truth.is_free_point(tx, ty) {
            return true;
        }
        let res = self.truth.resolution();
        let dir = (delta.0 / len, -delta.1 / len);
        self.truth.cast_px((pose.x / res, pose.y / res), dir, len / res).is_some_and(|t| t < len / res)
    }

    /// Moves along `delta`, stopping one pixel short of the first obstacle.
    fn execute(&self, pose: &ContinuousPose, delta: (f64, f64)) -> ContinuousPose {
        let len = delta.0.hypot(delta.1);
        if len < 1e-12 {
            return *pose;
        }
        let res = self.truth.resolution();
        let dir = (delta.0 / len, -delta.1 / len);
        let travel = match self.truth.cast_px((pose.x / res, pose.y / res), dir, len / res) {
            Some(t) if t < len / res => ((t - 1.0) * res).max(0.0),
            _ => len,
        };
        let moved = ContinuousPose::new(pose.x + dir.0 * travel, pose.y + dir.1 * travel, pose.heading);
        if self.truth.is_free_point(moved.x, moved.y) {
            moved
        } else {
            *pose
        }
    }
}
