//! Run configuration: defaults, then a JSON config file, then flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Deserializer};

use activeloc::env::{NoiseProfile, RewardKind};
use activeloc::policy::PolicyKind;

/// Policy choice; `External` asks a remote model over the wire protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyChoice {
    Builtin(PolicyKind),
    External,
}

impl FromStr for PolicyChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("external") {
            return Ok(PolicyChoice::External);
        }
        Ok(PolicyChoice::Builtin(s.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodChoice {
    Sm,
    External,
}

impl FromStr for LikelihoodChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sm" => Ok(LikelihoodChoice::Sm),
            "external" => Ok(LikelihoodChoice::External),
            _ => bail!("unknown likelihood {s:?}, expected sm or external"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => bail!("unknown precision {s:?}, expected f32 or f64"),
        }
    }
}

/// `(Θ, N, M)` grid for benchmarks, written `ΘxNxM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchGrid(pub usize, pub usize, pub usize);

impl FromStr for BenchGrid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(['x', 'X', '×'])
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("grid {s:?} is not ΘxNxM"))?;
        match parts[..] {
            [h, n, m] => Ok(BenchGrid(h, n, m)),
            _ => bail!("grid {s:?} is not ΘxNxM"),
        }
    }
}

fn parsed<'de, D, T>(d: D) -> std::result::Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: std::fmt::Display,
{
    String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
}

fn parsed_list<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: std::fmt::Display,
{
    Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
}

/// Every setting of every command. The JSON form uses the map sidecar's
/// `N`, `M`, `Theta` keys for the grid and the flag spellings for names.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Map file (PGM with sidecar); generated mazes when absent.
    pub map: Option<PathBuf>,
    #[serde(rename = "N")]
    pub rows: usize,
    #[serde(rename = "M")]
    pub cols: usize,
    #[serde(rename = "Theta")]
    pub headings: usize,
    /// Distinct generated maps; episode `i` runs on map `i mod maps`.
    pub maps: usize,
    pub policy: String,
    pub likelihood: LikelihoodChoice,
    #[serde(deserialize_with = "parsed")]
    pub reward: RewardKind,
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
    #[serde(deserialize_with = "parsed")]
    pub noise_profile: NoiseProfile,
    pub beta: f64,
    pub out: PathBuf,
    pub serve_addr: String,
    /// Server answering `policy_query` when the policy is external.
    pub policy_addr: Option<String>,
    /// Server answering `likelihood_query` when the likelihood is external.
    pub likelihood_addr: Option<String>,
    pub traces: bool,
    pub count: usize,
    pub n_maps: usize,
    pub poses: usize,
    pub domain_randomization: bool,
    pub reps: usize,
    #[serde(deserialize_with = "parsed_list")]
    pub grids: Vec<BenchGrid>,
    pub bench_aml: bool,
    /// Scalar type for bench: `f32` or `f64`.
    pub precision: Precision,
    pub stdio: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: None,
            rows: 11,
            cols: 11,
            headings: 4,
            maps: 1,
            policy: "aml".into(),
            likelihood: LikelihoodChoice::Sm,
            reward: RewardKind::BelGT,
            episodes: 10,
            horizon: 11,
            seed: 0,
            noise_profile: NoiseProfile::None,
            beta: 100.0,
            out: PathBuf::from("out"),
            serve_addr: "127.0.0.1:7878".into(),
            policy_addr: None,
            likelihood_addr: None,
            traces: true,
            count: 10,
            n_maps: 10,
            poses: 10,
            domain_randomization: true,
            reps: 10,
            grids: vec![BenchGrid(4, 11, 11), BenchGrid(4, 33, 33), BenchGrid(8, 33, 33), BenchGrid(24, 33, 33)],
            bench_aml: false,
            precision: Precision::F32,
            stdio: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn policy_choice(&self) -> Result<PolicyChoice> {
        self.policy.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.policy_choice()?;
        if self.map.as_ref().is_some_and(|m| !m.exists()) {
            bail!("map file {} does not exist", self.map.as_ref().unwrap().display());
        }
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if self.maps == 0 {
            bail!("maps must be at least 1");
        }
        if self.policy_choice()? == PolicyChoice::External && self.policy_addr.is_none() {
            bail!("an external policy needs --policy-addr");
        }
        if self.likelihood == LikelihoodChoice::External && self.likelihood_addr.is_none() {
            bail!("an external likelihood needs --likelihood-addr");
        }
        Ok(())
    }
}

/// Parses `N,M,Θ`.
fn parse_geometry(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("geometry {s:?} is not N,M,Θ"))?;
    match parts[..] {
        [n, m, t] => Ok((n, m, t)),
        _ => bail!("geometry {s:?} is not N,M,Θ"),
    }
}

/// Flags shared by every command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; flags take precedence over it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Map PGM (with its .json sidecar) instead of generated mazes
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Coarse grid as N,M,Θ
    #[arg(long, value_parser = parse_geometry)]
    pub geometry: Option<(usize, usize, usize)>,
    /// Number of generated maps episodes cycle through
    #[arg(long)]
    pub maps: Option<usize>,
    /// random, aml, greedy, left, right, forward or external
    #[arg(long)]
    pub policy: Option<String>,
    /// sm or external
    #[arg(long)]
    pub likelihood: Option<LikelihoodChoice>,
    /// bel-gt, info-gain, bel-new, expl, bel-ent, hit-rate or dist
    #[arg(long)]
    pub reward: Option<RewardKind>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// none, moderate or heavy
    #[arg(long)]
    pub noise_profile: Option<NoiseProfile>,
    /// Scan-matching temperature
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Listen address for serve
    #[arg(long)]
    pub serve_addr: Option<String>,
    #[arg(long)]
    pub policy_addr: Option<String>,
    #[arg(long)]
    pub likelihood_addr: Option<String>,
    /// Skip per-episode trace files
    #[arg(long)]
    pub no_traces: bool,
    /// Maps to generate (gen-maps)
    #[arg(long)]
    pub count: Option<usize>,
    /// Maps in the dataset (gen-dataset)
    #[arg(long)]
    pub n_maps: Option<usize>,
    /// Samples per map (gen-dataset)
    #[arg(long)]
    pub poses: Option<usize>,
    /// Disable domain randomization (gen-dataset)
    #[arg(long)]
    pub no_dr: bool,
    /// Timed repetitions per grid (bench)
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated ΘxNxM grids (bench)
    #[arg(long, value_delimiter = ',')]
    pub grids: Option<Vec<BenchGrid>>,
    /// Also time lookahead decisions (bench)
    #[arg(long)]
    pub bench_aml: bool,
    /// Scalar type for bench: f32 or f64
    #[arg(long)]
    pub precision: Option<Precision>,
    /// Serve on stdin/stdout instead of TCP
    #[arg(long)]
    pub stdio: bool,
}

impl Flags {
    /// Defaults, overlaid by the config file, overlaid by the flags given.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { c.$field = v.clone(); } )* };
        }
        take!(
            policy,
            likelihood,
            reward,
            episodes,
            horizon,
            seed,
            noise_profile,
            beta,
            out,
            serve_addr,
            count,
            n_maps,
            poses,
            reps,
            grids,
            maps,
            precision
        );
        if let Some(m) = &self.map {
            c.map = Some(m.clone());
        }
        if let Some((n, m, t)) = self.geometry {
            (c.rows, c.cols, c.headings) = (n, m, t);
        }
        if self.policy_addr.is_some() {
            c.policy_addr = self.policy_addr.clone();
        }
        if self.likelihood_addr.is_some() {
            c.likelihood_addr = self.likelihood_addr.clone();
        }
        c.traces &= !self.no_traces;
        c.domain_randomization &= !self.no_dr;
        c.bench_aml |= self.bench_aml;
        c.stdio |= self.stdio;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"N": 7, "M": 9, "Theta": 8, "episodes": 3, "horizon": 5, "policy": "random", "reward": "info-gain", "noise_profile": "heavy", "grids": ["4x7x7"]}"#).unwrap();
        let flags = Flags { config: Some(path), horizon: Some(2), ..Default::default() };
        let c = flags.resolve().unwrap();
        assert_eq!((c.rows, c.cols, c.headings), (7, 9, 8));
        assert_eq!(c.episodes, 3);
        assert_eq!(c.horizon, 2);
        assert_eq!(c.policy, "random");
        assert_eq!(c.reward, RewardKind::InfoGain);
        assert_eq!(c.noise_profile, NoiseProfile::Heavy);
        assert_eq!(c.grids, vec![BenchGrid(4, 7, 7)]);
        assert_eq!(c.reps, RunConfig::default().reps);
    }

    #[test]
    fn unknown_keys_and_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"horizn": 5}"#).unwrap();
        assert!(Flags { config: Some(path), ..Default::default() }.resolve().is_err());
        assert!(Flags { policy: Some("telepathy".into()), ..Default::default() }.resolve().is_err());
        assert!(Flags { policy: Some("external".into()), ..Default::default() }.resolve().is_err());
        assert!(Flags { map: Some("/nonexistent.pgm".into()), ..Default::default() }.resolve().is_err());
    }

    #[test]
    fn grid_syntax() {
        assert_eq!("24x33x33".parse::<BenchGrid>().unwrap(), BenchGrid(24, 33, 33));
        assert!("4x11".parse::<BenchGrid>().is_err());
        assert_eq!(parse_geometry("11,11,4").unwrap(), (11, 11, 4));
    }
}
