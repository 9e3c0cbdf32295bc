//! Command implementations behind the `activeloc` binary.

pub mod commands;
pub mod config;

pub use commands::{
    build_environments, build_server, cmd_bench, cmd_gen_dataset, cmd_gen_maps, cmd_run, cmd_serve, episode_config,
    evaluate, load_maps,
};
pub use config::{BenchGrid, Flags, LikelihoodChoice, PolicyChoice, Precision, RunConfig};
