use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::MotionNoise;
use crate::lidar::{LidarConfig, ScanNoise};
use crate::likelihood::HierarchyConfig;
use crate::mapgen::MorphConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardKind {
    /// Belief mass at the true pose.
    BelGT,
    /// Entropy decrease over the step.
    InfoGain,
    /// 1 when the most probable pose has not been the estimate before.
    BelNew,
    /// 1 when the true pose has not been visited before.
    Expl,
    /// Negative belief entropy.
    BelEnt,
    /// 1 when the estimate equals the true pose.
    HitRate,
    /// Negative Manhattan error of the estimate.
    Dist,
}

impl RewardKind {
    pub const ALL: [RewardKind; 7] = [
        RewardKind::BelGT,
        RewardKind::InfoGain,
        RewardKind::BelNew,
        RewardKind::Expl,
        RewardKind::BelEnt,
        RewardKind::HitRate,
        RewardKind::Dist,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RewardKind::BelGT => "bel-gt",
            RewardKind::InfoGain => "info-gain",
            RewardKind::BelNew => "bel-new",
            RewardKind::Expl => "expl",
            RewardKind::BelEnt => "bel-ent",
            RewardKind::HitRate => "hit-rate",
            RewardKind::Dist => "dist",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == key || format!("{k:?}").to_ascii_lowercase() == key)
            .ok_or_else(|| Error::param(format!("unknown reward kind {s:?}")))
    }
}

/// Every noise source of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    /// Applied to every simulated scan.
    pub scan: ScanNoise,
    /// Smoothing in the filter's transition model.
    pub motion: MotionNoise,
    /// Std-dev of the relative error on commanded translations.
    pub actuation_scale: f64,
    /// Std-dev of heading error per step, degrees.
    pub actuation_heading_deg: f64,
    /// Maximum spawn offset from the centroid, as a fraction of half the cell pitch.
    pub spawn_offset: f64,
    /// Pixels flipped in the filter's copy of the map.
    pub map_flips: usize,
    /// Extra morphology on the filter's copy of the map.
    pub map_morph: MorphConfig,
}

impl NoiseSettings {
    pub const NONE: NoiseSettings = NoiseSettings {
        scan: ScanNoise::NONE,
        motion: MotionNoise::NONE,
        actuation_scale: 0.0,
        actuation_heading_deg: 0.0,
        spawn_offset: 0.0,
        map_flips: 0,
        map_morph: MorphConfig::NONE,
    };

    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.map_morph.validate()?;
        let ok = self.actuation_scale >= 0.0
            && self.actuation_heading_deg >= 0.0
            && (0.0..=1.0).contains(&self.spawn_offset)
            && self.scan.sigma >= 0.0
            && (0.0..=1.0).contains(&self.scan.dropout)
            && self.scan.rot_jitter_deg >= 0.0;
        if !ok {
            return Err(Error::param(format!("invalid noise settings {self:?}")));
        }
        Ok(())
    }
}

/// Named noise presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseProfile {
    None,
    Moderate,
    /// ±2° scan rotation, 100 flipped pixels on the filter map, range noise.
    Heavy,
}

impl NoiseProfile {
    pub fn settings(&self) -> NoiseSettings {
        let actuated = NoiseSettings {
            scan: ScanNoise { sigma: 0.02, dropout: 0.01, rot_jitter_deg: 0.0 },
            motion: MotionNoise::default(),
            actuation_scale: 0.05,
            actuation_heading_deg: 1.0,
            spawn_offset: 0.25,
            ..NoiseSettings::NONE
        };
        match self {
            NoiseProfile::None => NoiseSettings::NONE,
            NoiseProfile::Moderate => actuated,
            NoiseProfile::Heavy => NoiseSettings {
                scan: ScanNoise { sigma: 0.02, dropout: 0.02, rot_jitter_deg: 2.0 },
                map_flips: 100,
                map_morph: MorphConfig { dilate: (0, 1), erode: (0, 1), surface_prob: 0.5 },
                ..actuated
            },
        }
    }
}

impl FromStr for NoiseProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "off" => Ok(NoiseProfile::None),
            "moderate" => Ok(NoiseProfile::Moderate),
            "heavy" => Ok(NoiseProfile::Heavy),
            _ => Err(Error::param(format!("unknown noise profile {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub lidar: LidarConfig,
    pub horizon: usize,
    pub reward: RewardKind,
    pub noise: NoiseSettings,
    /// Temperature of the scan-matching likelihood.
    pub beta: f64,
    pub hierarchy: HierarchyConfig,
    /// Run fine-level drift correction every this many steps; `0` disables it.
    pub drift_every: usize,
    /// Minimum belief mass at the estimate before a drift correction is applied.
    pub drift_min_mass: f64,
    /// Per-axis offsets smaller than this fraction of a sub-cell pitch are ignored.
    #[serde(default = "default_deadband")]
    pub drift_deadband: f64,
}

fn default_deadband() -> f64 {
    0.5
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            lidar: LidarConfig::default(),
            horizon: 11,
            reward: RewardKind::BelGT,
            noise: NoiseSettings::NONE,
            beta: 100.0,
            hierarchy: HierarchyConfig::default(),
            drift_every: 1,
            drift_min_mass: 0.5,
            drift_deadband: default_deadband(),
        }
    }
}

impl EpisodeConfig {
    pub fn with_profile(profile: NoiseProfile) -> Self {
        Self { noise: profile.settings(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.lidar.validate()?;
        self.noise.validate()?;
        if self.horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::param(format!("temperature β = {} must be positive", self.beta)));
        }
        if self.hierarchy.k < 2 || self.hierarchy.crop_px < self.hierarchy.k {
            return Err(Error::param(format!("invalid hierarchy {:?}", self.hierarchy)));
        }
        if !(self.drift_deadband >= 0.0 && self.drift_deadband.is_finite()) {
            return Err(Error::param(format!("drift deadband {} must be non-negative", self.drift_deadband)));
        }
        Ok(())
    }
}
