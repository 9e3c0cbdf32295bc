use std::f64::consts::TAU;

use super::scan::{LidarConfig, Scan};
use crate::error::{Error, Result};
use crate::mapgen::GridMap;
use crate::num::Scalar;
use crate::pose::ContinuousPose;

/// Unit directions `(dx, dy)` in raster coordinates for every beam of a scan
/// taken at `heading`.
///
/// For a full-circle sensor whose heading is a whole number of beam steps,
/// directions come from one shared table indexed by absolute beam number, so
/// rotating the robot by `s` beams rotates the returned ranges by exactly `s`.
pub fn beam_directions(config: &LidarConfig, heading: f64) -> Vec<(f64, f64)> {
    let b = config.beams;
    if config.is_full_circle() {
        let steps = heading.rem_euclid(TAU) * b as f64 / TAU;
        let s = steps.round();
        if (steps - s).abs() < 1e-9 {
            let s = s as usize % b;
            return (0..b).map(|i| table_direction((i + s) % b, b)).collect();
        }
    }
    (0..b)
        .map(|i| {
            let (sin, cos) = (heading + config.beam_angle(i)).sin_cos();
            (cos, -sin)
        })
        .collect()
}

fn table_direction(i: usize, beams: usize) -> (f64, f64) {
    if (4 * i).is_multiple_of(beams) {
        return match 4 * i / beams {
            0 => (1.0, 0.0),
            1 => (0.0, -1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, 1.0),
        };
    }
    let (sin, cos) = (i as f64 * TAU / beams as f64).sin_cos();
    (cos, -sin)
}

/// Simulated scan from `pose`. Each beam returns the distance to the boundary
/// of the first obstacle pixel it enters, `+∞` past `max_range`, and never
/// less than `min_range`.
pub fn raycast<T: Scalar>(map: &GridMap, pose: &ContinuousPose, config: &LidarConfig) -> Result<Scan<T>> {
    config.validate()?;
    if !map.is_free_point(pose.x, pose.y) {
        return Err(Error::InvalidPose { x: pose.x, y: pose.y });
    }
    Ok(Scan { ranges: cast_unchecked(map, pose, config), config: *config })
}

/// Ray casting without the free-origin check.
pub(crate) fn cast_unchecked<T: Scalar>(map: &GridMap, pose: &ContinuousPose, config: &LidarConfig) -> Vec<T> {
    let res = map.resolution();
    let origin = (pose.x / res, pose.y / res);
    let max_px = config.max_range / res;
    beam_directions(config, pose.heading)
        .into_iter()
        .map(|dir| match map.cast_px(origin, dir, max_px) {
            Some(t) => T::lit((t * res).max(config.min_range)),
            None => T::infinity(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapgen::{GridGeometry, FREE, OBSTACLE};

    /// 10 m square room at 0.05 m/px: 200×200 px with a 1 px wall ring.
    fn ten_meter_room() -> GridMap {
        let g = GridGeometry::new(10, 10, 4, 20, 0.05).unwrap();
        GridMap::new(vec![FREE; 200 * 200], g).unwrap()
    }

    #[test]
    fn square_room_center() {
        let m = ten_meter_room();
        let s: Scan<f64> = raycast(&m, &ContinuousPose::new(5.0, 5.0, 0.0), &LidarConfig::default()).unwrap();
        // east wall occupies pixel column 199, starting at x = 9.95 m
        assert!((s.ranges[0] - (5.0 - 0.05)).abs() <= 0.05);
        assert_eq!(s.ranges[90], s.ranges[0]);
        // west and north walls end at x = 0.05 m and y = 0.05 m
        assert!((s.ranges[180] - 4.95).abs() < 1e-12);
        assert!((s.ranges[270] - 4.95).abs() < 1e-12);
    }

    #[test]
    fn corridor_lateral_beams() {
        // horizontal corridor three pixels tall, rows 10..13
        let g = GridGeometry::new(1, 2, 4, 24, 0.05).unwrap();
        let mut occ = vec![OBSTACLE; 24 * 48];
        for r in 10..13 {
            for c in 1..47 {
                occ[r * 48 + c] = FREE;
            }
        }
        let m = GridMap::new(occ, g).unwrap();
        let pose = ContinuousPose::new(24.0 * 0.05, 11.5 * 0.05, 0.0);
        let cfg = LidarConfig { min_range: 0.0, ..LidarConfig::default() };
        let s: Scan<f64> = raycast(&m, &pose, &cfg).unwrap();
        assert!((s.ranges[90] - 1.5 * 0.05).abs() < 1e-12);
        assert!((s.ranges[270] - 1.5 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn obstacle_pose_rejected() {
        let m = ten_meter_room();
        let err = raycast::<f64>(&m, &ContinuousPose::new(0.01, 0.01, 0.0), &LidarConfig::default());
        assert!(matches!(err, Err(Error::InvalidPose { .. })));
    }

    #[test]
    fn range_limits_applied() {
        let m = ten_meter_room();
        let cfg = LidarConfig { max_range: 3.0, min_range: 0.15, ..LidarConfig::default() };
        let s: Scan<f64> = raycast(&m, &ContinuousPose::new(5.0, 5.0, 0.0), &cfg).unwrap();
        assert!(s.ranges.iter().all(|r| r.is_infinite()));
        let s: Scan<f64> = raycast(&m, &ContinuousPose::new(0.06, 5.0, 0.0), &LidarConfig::default()).unwrap();
        assert_eq!(s.ranges[180], 0.15);
    }

    #[test]
    fn aligned_heading_rotates_beams_exactly() {
        let cfg = LidarConfig::default();
        let base = beam_directions(&cfg, 0.0);
        let turned = beam_directions(&cfg, TAU * 90.0 / 360.0);
        for i in 0..360 {
            assert_eq!(turned[i], base[(i + 90) % 360]);
        }
    }
}
