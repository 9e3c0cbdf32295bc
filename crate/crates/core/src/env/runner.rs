//! Running whole episodes, trace files and per-step summaries.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::episode::Environment;
use super::metrics::StepMetrics;
use crate::error::Result;
use crate::filter::{Action, BeliefGrid};
use crate::num::Scalar;
use crate::policy::{PolicyInput, PolicyProvider};
use crate::pose::ContinuousPose;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub policy: String,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Index 0 is the state after reset; index `k` follows action `k`.
    pub metrics: Vec<StepMetrics>,
    pub poses: Vec<ContinuousPose>,
}

impl EpisodeRecord {
    pub fn final_metrics(&self) -> &StepMetrics {
        self.metrics.last().expect("an episode has at least its reset state")
    }
}

/// JSON-lines trace plus a side file of belief snapshots.
pub struct TraceWriter {
    lines: BufWriter<File>,
    beliefs: BufWriter<File>,
    offset: u64,
}

impl TraceWriter {
    /// Creates `<stem>.jsonl` and `<stem>.beliefs`.
    pub fn create(stem: &Path) -> Result<Self> {
        if let Some(dir) = stem.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        Ok(Self {
            lines: BufWriter::new(File::create(with_suffix(stem, "jsonl"))?),
            beliefs: BufWriter::new(File::create(with_suffix(stem, "beliefs"))?),
            offset: 0,
        })
    }

    fn header(&mut self, value: serde_json::Value) -> Result<()> {
        serde_json::to_writer(&mut self.lines, &value)?;
        self.lines.write_all(b"\n")?;
        Ok(())
    }

    fn record<T: Scalar>(
        &mut self,
        action: Option<Action>,
        reward: Option<f64>,
        metrics: &StepMetrics,
        pose: &ContinuousPose,
        belief: &BeliefGrid<T>,
    ) -> Result<()> {
        let bytes = belief.write_snapshot(&mut self.beliefs)?;
        let line = json!({
            "kind": "step",
            "step": metrics.step,
            "action": action.map(Action::index),
            "reward": reward,
            "metrics": metrics,
            "pose": pose,
            "belief_offset": self.offset,
            "belief_bytes": bytes,
        });
        self.offset += bytes as u64;
        serde_json::to_writer(&mut self.lines, &line)?;
        self.lines.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.lines.flush()?;
        self.beliefs.flush()?;
        Ok(())
    }
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Runs one episode to its horizon. Actions are sampled from the policy's
/// distribution with a stream derived from `seed`.
pub fn run_episode<T: Scalar>(
    env: &mut Environment<T>,
    policy: &dyn PolicyProvider<T>,
    seed: u64,
    mut trace: Option<&mut TraceWriter>,
) -> Result<EpisodeRecord> {
    let mut rng = stream(seed, "policy", 0);
    let mut obs = env.reset(seed)?;
    let state = env.state().expect("reset started an episode");
    let mut record = EpisodeRecord {
        seed,
        policy: policy.name().to_string(),
        actions: Vec::new(),
        rewards: Vec::new(),
        metrics: vec![state.metrics],
        poses: vec![state.pose],
    };
    if let Some(t) = trace.as_deref_mut() {
        let s = obs.belief.shape();
        t.header(json!({
            "kind": "header",
            "version": 1,
            "seed": seed,
            "policy": policy.name(),
            "headings": s.headings,
            "rows": s.rows,
            "cols": s.cols,
            "horizon": env.config().horizon,
            "reward": env.config().reward.as_str(),
        }))?;
        t.record(None, None, &state.metrics, &state.pose, &obs.belief)?;
    }
    loop {
        let input =
            PolicyInput { belief: &obs.belief, map: env.filter_map(), map_low: &obs.map_low, scan_low: &obs.scan_low };
        let action = policy.action_dist(&input)?.sample(&mut rng);
        let out = env.step(action)?;
        record.actions.push(action);
        record.rewards.push(out.reward);
        record.metrics.push(out.info.metrics);
        record.poses.push(out.info.pose);
        if let Some(t) = trace.as_deref_mut() {
            t.record(Some(action), Some(out.reward), &out.info.metrics, &out.info.pose, &out.observation.belief)?;
        }
        obs = out.observation;
        if out.done {
            return Ok(record);
        }
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub step: usize,
    pub episodes: usize,
    pub hit_mean: f64,
    pub hit_std: f64,
    pub wasserstein_mean: f64,
    pub wasserstein_std: f64,
    pub belief_at_truth_mean: f64,
    pub belief_at_truth_std: f64,
}

/// Per-step aggregates over episodes, steps `1..=T`.
pub fn summarize(records: &[EpisodeRecord]) -> Vec<SummaryRow> {
    let horizon = records.iter().map(|r| r.metrics.len().saturating_sub(1)).max().unwrap_or(0);
    (1..=horizon)
        .map(|step| {
            let at: Vec<&StepMetrics> = records.iter().filter_map(|r| r.metrics.get(step)).collect();
            let col = |f: fn(&StepMetrics) -> f64| mean_std(&at.iter().map(|m| f(m)).collect::<Vec<_>>());
            let (hit_mean, hit_std) = col(|m| f64::from(u8::from(m.hit)));
            let (wasserstein_mean, wasserstein_std) = col(|m| m.wasserstein);
            let (belief_at_truth_mean, belief_at_truth_std) = col(|m| m.belief_at_truth);
            SummaryRow {
                step,
                episodes: at.len(),
                hit_mean,
                hit_std,
                wasserstein_mean,
                wasserstein_std,
                belief_at_truth_mean,
                belief_at_truth_std,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: &mut W) -> Result<()> {
    writeln!(out, "step,episodes,hit_rate_mean,hit_rate_std,wasserstein_mean,wasserstein_std,bel_gt_mean,bel_gt_std")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.step,
            r.episodes,
            r.hit_mean,
            r.hit_std,
            r.wasserstein_mean,
            r.wasserstein_std,
            r.belief_at_truth_mean,
            r.belief_at_truth_std
        )?;
    }
    Ok(())
}
