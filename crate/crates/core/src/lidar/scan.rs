//! Range scans, sensor configuration and domain-randomization corruption.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub beams: usize,
    /// Field of view, radians. A full circle places beam 0 straight ahead
    /// and beam `i` at `i·2π/beams`; narrower sensors span `[-fov/2, fov/2]`.
    pub fov: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl LidarConfig {
    /// 360° sensor with one beam per degree, 0.15–8 m.
    pub const fn full_circle() -> Self {
        Self { beams: 360, fov: TAU, min_range: 0.15, max_range: 8.0 }
    }

    /// 1040 beams over 260°.
    pub fn wide_260() -> Self {
        Self { beams: 1040, fov: 260f64.to_radians(), min_range: 0.06, max_range: 8.0 }
    }

    pub fn is_full_circle(&self) -> bool {
        (self.fov - TAU).abs() < 1e-9
    }

    pub fn validate(&self) -> Result<()> {
        if self.beams < 2 {
            return Err(Error::param("a scan needs at least two beams"));
        }
        if !(self.fov > 0.0 && self.fov <= TAU + 1e-9) {
            return Err(Error::param(format!("fov {} outside (0, 2π]", self.fov)));
        }
        if !(self.min_range >= 0.0 && self.max_range > self.min_range && self.max_range.is_finite()) {
            return Err(Error::param("range limits must satisfy 0 ≤ min < max < ∞"));
        }
        Ok(())
    }

    /// Beam angle relative to the robot heading.
    pub fn beam_angle(&self, i: usize) -> f64 {
        if self.is_full_circle() {
            i as f64 * TAU / self.beams as f64
        } else {
            -self.fov / 2.0 + i as f64 * self.fov / (self.beams - 1) as f64
        }
    }

    /// Angular spacing between adjacent beams, degrees.
    pub fn beam_step_deg(&self) -> f64 {
        if self.is_full_circle() {
            360.0 / self.beams as f64
        } else {
            self.fov.to_degrees() / (self.beams - 1) as f64
        }
    }
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self::full_circle()
    }
}

/// One revolution of ranges, meters. Out-of-range returns are `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan<T> {
    pub ranges: Vec<T>,
    pub config: LidarConfig,
}

impl<T: Scalar> Scan<T> {
    pub fn new(ranges: Vec<T>, config: LidarConfig) -> Result<Self> {
        if ranges.len() != config.beams {
            return Err(Error::param(format!("{} ranges for a {}-beam sensor", ranges.len(), config.beams)));
        }
        Ok(Self { ranges, config })
    }

    pub fn beams(&self) -> usize {
        self.ranges.len()
    }

    pub fn finite_count(&self) -> usize {
        self.ranges.iter().filter(|r| r.is_finite()).count()
    }

    /// Nearest-angle resampling onto `beams` evenly spaced full-circle
    /// beams. Directions the sensor does not cover read `+∞`.
    pub fn reduce_to(&self, beams: usize) -> Scan<T> {
        let src = &self.config;
        if src.beams == beams && src.is_full_circle() {
            return self.clone();
        }
        let ranges = (0..beams)
            .map(|j| {
                let target = j as f64 * TAU / beams as f64;
                if src.is_full_circle() {
                    let i = (target * src.beams as f64 / TAU).round() as usize % src.beams;
                    self.ranges[i]
                } else {
                    let rel = (target + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
                    let step = src.fov / (src.beams - 1) as f64;
                    let pos = (rel + src.fov / 2.0) / step;
                    if pos < -0.5 || pos > (src.beams - 1) as f64 + 0.5 {
                        T::infinity()
                    } else {
                        self.ranges[(pos.round().max(0.0) as usize).min(src.beams - 1)]
                    }
                }
            })
            .collect();
        Scan { ranges, config: LidarConfig { beams, fov: TAU, ..*src } }
    }
}

/// Sensor-side domain randomization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanNoise {
    /// Gaussian range noise, meters.
    pub sigma: f64,
    /// Per-beam probability of reading `+∞`.
    pub dropout: f64,
    /// Rotation jitter bound, degrees, quantized to whole beams.
    pub rot_jitter_deg: f64,
}

impl ScanNoise {
    pub const NONE: ScanNoise = ScanNoise { sigma: 0.0, dropout: 0.0, rot_jitter_deg: 0.0 };

    pub fn is_none(&self) -> bool {
        self.sigma == 0.0 && self.dropout == 0.0 && self.rot_jitter_deg == 0.0
    }
}

pub fn corrupt_scan<T: Scalar>(scan: &Scan<T>, noise: &ScanNoise, seed: u64) -> Result<Scan<T>> {
    corrupt_scan_with(scan, noise, &mut rng_from_seed(seed))
}

/// Circular beam shift within `±rot_jitter_deg`, Gaussian range noise
/// (re-clamped to the sensor limits), then independent dropout.
pub fn corrupt_scan_with<T: Scalar, R: Rng + ?Sized>(
    scan: &Scan<T>,
    noise: &ScanNoise,
    rng: &mut R,
) -> Result<Scan<T>> {
    if !(0.0..).contains(&noise.sigma)
        || !(0.0..=1.0).contains(&noise.dropout)
        || !(0.0..).contains(&noise.rot_jitter_deg)
    {
        return Err(Error::param(format!("invalid scan noise {noise:?}")));
    }
    if noise.is_none() {
        return Ok(scan.clone());
    }
    let b = scan.beams();
    let max_shift = (noise.rot_jitter_deg / scan.config.beam_step_deg() + 1e-9).floor() as i64;
    let shift = if max_shift > 0 { rng.random_range(-max_shift..=max_shift) } else { 0 };
    let gauss = Normal::new(0.0, noise.sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let (lo, hi) = (scan.config.min_range, scan.config.max_range);
    let ranges = (0..b)
        .map(|i| {
            let src = (i as i64 + shift).rem_euclid(b as i64) as usize;
            let mut r = scan.ranges[src];
            if noise.sigma > 0.0 {
                let e = gauss.sample(rng);
                if r.is_finite() {
                    r = T::lit((r.f64() + e).clamp(lo, hi));
                }
            }
            if noise.dropout > 0.0 && rng.random_bool(noise.dropout) {
                r = T::infinity();
            }
            r
        })
        .collect();
    Ok(Scan { ranges, config: scan.config })
}
