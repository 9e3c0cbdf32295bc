use std::process::ExitCode;

use clap::{Parser, Subcommand};

use activeloc_cli::{cmd_bench, cmd_gen_dataset, cmd_gen_maps, cmd_run, cmd_serve, Flags};

#[derive(Parser)]
#[command(name = "activeloc", version, about = "Grid Bayes-filter active localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate maze maps with sidecars and a manifest
    GenMaps(Flags),
    /// Generate a likelihood training dataset
    GenDataset(Flags),
    /// Run evaluation episodes and write per-step summaries
    Run(Flags),
    /// Time likelihood (and optionally lookahead) cost across grid sizes
    Bench(Flags),
    /// Serve episodes over the NDJSON protocol
    Serve(Flags),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenMaps(f) => f.resolve().and_then(|c| cmd_gen_maps(&c).map(drop)),
        Command::GenDataset(f) => f.resolve().and_then(|c| cmd_gen_dataset(&c).map(drop)),
        Command::Run(f) => f.resolve().and_then(|c| cmd_run(&c).map(drop)),
        Command::Bench(f) => f.resolve().and_then(|c| cmd_bench(&c).map(drop)),
        Command::Serve(f) => f.resolve().and_then(|c| cmd_serve(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
