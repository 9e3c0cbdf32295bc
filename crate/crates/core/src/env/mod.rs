//! Episodes, rewards, metrics, dataset export and benchmarking.

mod bench;
mod config;
mod dataset;
mod episode;
mod metrics;
mod runner;

pub use bench::{run_benchmark, write_bench_csv, BenchConfig, BenchRow};
pub use config::{EpisodeConfig, NoiseProfile, NoiseSettings, RewardKind};
pub use dataset::{generate_dataset, DatasetConfig, DomainRandomization, ManifestEntry};
pub use episode::{Environment, EpisodeState, Observation, StepInfo, StepOutcome};
pub use metrics::{reward, uniform_wasserstein, wasserstein, StepMetrics, Visited};
pub use runner::{mean_std, run_episode, summarize, write_summary_csv, EpisodeRecord, SummaryRow, TraceWriter};
