use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::config::RewardKind;
use crate::filter::{entropy, map_estimate, BeliefGrid};
use crate::grid::CellPose;
use crate::num::Scalar;

/// Expected Manhattan pose distance between the belief and a point mass at
/// `truth`: `Σ p(x)·(|Δrow| + |Δcol| + circular heading distance)`.
pub fn wasserstein<T: Scalar>(belief: &BeliefGrid<T>, truth: CellPose) -> f64 {
    let s = belief.shape();
    let mut total = 0.0;
    for h in 0..s.headings {
        let dh = h.abs_diff(truth.heading);
        let dh = dh.min(s.headings - dh);
        for r in 0..s.rows {
            let dr = r.abs_diff(truth.row);
            let base = (h * s.rows + r) * s.cols;
            for (c, p) in belief.as_slice()[base..base + s.cols].iter().enumerate() {
                if !p.is_zero() {
                    total += p.f64() * (dh + dr + c.abs_diff(truth.col)) as f64;
                }
            }
        }
    }
    total
}

/// Expected distance from the truth of a belief spread evenly over every
/// heading of the free cells in `mask` (`N × M`, row-major).
pub fn uniform_wasserstein(mask: &[bool], headings: usize, cols: usize, truth: CellPose) -> f64 {
    let free: Vec<usize> = (0..mask.len()).filter(|i| mask[*i]).collect();
    if free.is_empty() {
        return 0.0;
    }
    let heading_mean = (0..headings)
        .map(|h| {
            let d = h.abs_diff(truth.heading);
            d.min(headings - d) as f64
        })
        .sum::<f64>()
        / headings as f64;
    let spatial =
        free.iter().map(|i| ((i / cols).abs_diff(truth.row) + (i % cols).abs_diff(truth.col)) as f64).sum::<f64>()
            / free.len() as f64;
    heading_mean + spatial
}

/// Localization quality after a step (or after reset, as step 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub truth: CellPose,
    pub estimate: CellPose,
    pub hit: bool,
    /// Manhattan pose distance between estimate and truth.
    pub error: usize,
    pub wasserstein: f64,
    pub belief_at_truth: f64,
    pub entropy: f64,
    /// The measurement update found no mass and kept the prior.
    pub degenerate: bool,
}

impl StepMetrics {
    pub fn compute<T: Scalar>(step: usize, belief: &BeliefGrid<T>, truth: CellPose, degenerate: bool) -> Self {
        let estimate = map_estimate(belief);
        Self {
            step,
            truth,
            estimate,
            hit: estimate == truth,
            error: estimate.manhattan(&truth, belief.shape().headings),
            wasserstein: wasserstein(belief, truth),
            belief_at_truth: belief.get(truth).f64(),
            entropy: entropy(belief),
            degenerate,
        }
    }
}

/// Poses seen so far this episode, for the novelty rewards.
#[derive(Debug, Clone, Default)]
pub struct Visited {
    pub believed: HashSet<CellPose>,
    pub true_poses: HashSet<CellPose>,
}

/// Reward for a transition from `prev` to `now`. Updates `visited`.
pub fn reward(kind: RewardKind, prev: &StepMetrics, now: &StepMetrics, visited: &mut Visited) -> f64 {
    let new_belief = visited.believed.insert(now.estimate);
    let new_truth = visited.true_poses.insert(now.truth);
    match kind {
        RewardKind::BelGT => now.belief_at_truth,
        RewardKind::InfoGain => prev.entropy - now.entropy,
        RewardKind::BelNew => f64::from(u8::from(new_belief)),
        RewardKind::Expl => f64::from(u8::from(new_truth)),
        RewardKind::BelEnt => -now.entropy,
        RewardKind::HitRate => f64::from(u8::from(now.hit)),
        RewardKind::Dist => -(now.error as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid3, Shape3};

    #[test]
    fn point_mass_at_truth() {
        let s = Shape3::new(4, 3, 3);
        let truth = CellPose::new(1, 1, 2);
        let b = BeliefGrid::<f64>::one_hot(s, truth);
        assert_eq!(wasserstein(&b, truth), 0.0);
        let m = StepMetrics::compute(1, &b, truth, false);
        let mut v = Visited::default();
        assert_eq!(reward(RewardKind::BelGT, &m, &m, &mut v), 1.0);
        assert_eq!(reward(RewardKind::HitRate, &m, &m, &mut v), 1.0);
        assert_eq!(reward(RewardKind::Dist, &m, &m, &mut v), 0.0);
    }

    #[test]
    fn split_mass() {
        let s = Shape3::new(4, 1, 6);
        let truth = CellPose::new(0, 0, 1);
        let mut g = Grid3::zeros(s);
        g.set(CellPose::new(0, 0, 2), 0.5);
        g.set(CellPose::new(0, 0, 4), 0.5);
        assert!((wasserstein(&BeliefGrid::<f64>::new(g), truth) - 2.0).abs() < 1e-15);
        // 0.6 at the truth, 0.4 three steps away
        let mut g = Grid3::zeros(s);
        g.set(truth, 0.6);
        g.set(CellPose::new(3, 0, 3), 0.4);
        let b = BeliefGrid::<f64>::new(g);
        assert!((wasserstein(&b, truth) - 1.2).abs() < 1e-12);
        let m = StepMetrics::compute(1, &b, truth, false);
        assert_eq!(m.belief_at_truth, 0.6);
    }

    #[test]
    fn novelty_rewards_fire_once() {
        let s = Shape3::new(4, 2, 2);
        let b = BeliefGrid::<f64>::one_hot(s, CellPose::new(0, 0, 0));
        let m = StepMetrics::compute(1, &b, CellPose::new(0, 1, 1), false);
        let mut v = Visited::default();
        assert_eq!(reward(RewardKind::BelNew, &m, &m, &mut v), 1.0);
        assert_eq!(reward(RewardKind::BelNew, &m, &m, &mut v), 0.0);
        assert_eq!(reward(RewardKind::Expl, &m, &m, &mut v), 0.0);
        assert_eq!(reward(RewardKind::Dist, &m, &m, &mut v), -2.0);
    }

    #[test]
    fn uniform_baseline_matches_direct_sum() {
        let mask = vec![true, false, true, true];
        let truth = CellPose::new(1, 0, 0);
        let mut g = Grid3::zeros(Shape3::new(4, 2, 2));
        for h in 0..4 {
            for i in [0, 2, 3] {
                g.set(CellPose::new(h, i / 2, i % 2), 1.0 / 12.0);
            }
        }
        let direct = wasserstein(&BeliefGrid::<f64>::new(g), truth);
        assert!((uniform_wasserstein(&mask, 4, 2, truth) - direct).abs() < 1e-12);
    }
}
