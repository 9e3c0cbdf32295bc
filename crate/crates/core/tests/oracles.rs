mod support;

use activeloc::env::wasserstein;
use activeloc::filter::Action;
use activeloc::filter::{map_estimate, BeliefGrid};
use activeloc::grid::{CellPose, Grid3, Shape3};
use activeloc::lidar::LidarConfig;
use activeloc::policy::{ActionDist, PolicyInput, PolicyProvider};
use proptest::prelude::*;
use support::*;

#[test]
fn exhaustive_lookahead_matches_brute_force() {
    println!("{}", check_aml_oracle().unwrap());
}

#[test]
fn wasserstein_matches_pairwise_sum() {
    println!("{}", check_wasserstein_oracle(100).unwrap());
}

#[test]
fn map_estimate_matches_exhaustive_argmax() {
    println!("{}", check_map_estimate_oracle(100).unwrap());
}

#[test]
fn lookahead_walks_toward_the_junction() {
    const BETA: f64 = 1000.0;
    // two aliased corridor poses facing east; only a forward step brings the
    // junction into range for one of them
    let map = ascii_map(&CORRIDOR, 4, 10);
    let lidar = LidarConfig { min_range: 0.05, max_range: 0.6, ..LidarConfig::default() };
    let oracle = BruteForce::new(&map, lidar, BETA);
    let shape = map.geometry().shape();
    let mut b = vec![0.0; shape.len()];
    b[shape.index(CellPose::new(0, 1, 3))] = 0.5;
    b[shape.index(CellPose::new(0, 1, 5))] = 0.5;
    let want = oracle.expected_entropies(&b);
    assert!(want[2] < want[0] - 0.1 && want[2] < want[1] - 0.1, "{want:?}");

    let matrix = std::sync::Arc::new(activeloc::lidar::ScanMatrix::<f64>::build(&map, &lidar).unwrap());
    let cfg = activeloc::policy::LookaheadConfig {
        top_h: shape.len(),
        ..activeloc::policy::LookaheadConfig::new(matrix, BETA, activeloc::filter::MotionNoise::NONE)
    };
    let policy = activeloc::policy::AmlPolicy::new(cfg).unwrap();
    let belief = BeliefGrid::new(Grid3::from_vec(shape, b).unwrap());
    let got = policy.expected_entropies(&belief, &map).unwrap();
    for k in 0..3 {
        assert!((got[k] - want[k]).abs() < 1e-9, "{got:?} vs {want:?}");
    }
    let low = map.coarse_obstacles();
    let input = PolicyInput { belief: &belief, map: &map, map_low: &low, scan_low: &low };
    assert_eq!(policy.action_dist(&input).unwrap(), ActionDist::one_hot(Action::Forward));
}

#[test]
fn hand_computed_distances() {
    let s = Shape3::new(4, 1, 7);
    let truth = CellPose::new(0, 0, 0);
    let mut g = Grid3::zeros(s);
    g.set(truth, 0.6);
    g.set(CellPose::new(0, 0, 3), 0.4);
    assert!((wasserstein(&BeliefGrid::new(g), truth) - 1.2).abs() < 1e-12);

    let mut g = Grid3::zeros(s);
    g.set(CellPose::new(0, 0, 1), 0.5);
    g.set(CellPose::new(0, 0, 3), 0.5);
    assert!((wasserstein(&BeliefGrid::new(g), truth) - 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn wasserstein_zero_only_at_point_mass(
        weights in prop::collection::vec(0.0f64..1.0, 4 * 3 * 3),
        t in 0usize..36,
    ) {
        let s = Shape3::new(4, 3, 3);
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let total: f64 = weights.iter().sum();
        let b = BeliefGrid::new(Grid3::from_vec(s, weights.iter().map(|w| w / total).collect()).unwrap());
        let truth = s.pose(t);
        let w = wasserstein(&b, truth);
        prop_assert!(w >= 0.0);
        let one_hot = b.get(truth) >= 1.0 - 1e-12;
        prop_assert_eq!(w < 1e-12, one_hot);
        prop_assert!((w - wasserstein_oracle(&b, truth)).abs() < 1e-9);
    }

    #[test]
    fn map_estimate_holds_the_maximum(weights in prop::collection::vec(0u8..4, 1..80)) {
        prop_assume!(weights.iter().any(|w| *w > 0));
        let s = Shape3::new(1, 1, weights.len());
        let total: f64 = weights.iter().map(|w| *w as f64).sum();
        let b = BeliefGrid::new(Grid3::from_vec(s, weights.iter().map(|w| *w as f64 / total).collect()).unwrap());
        prop_assert_eq!(map_estimate(&b), argmax_oracle(&b));
    }
}
