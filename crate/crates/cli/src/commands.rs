use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use activeloc::env::{
    generate_dataset, run_benchmark, run_episode, summarize, write_bench_csv, write_summary_csv, BenchConfig, BenchRow,
    DatasetConfig, DomainRandomization, Environment, EpisodeConfig, EpisodeRecord, ManifestEntry, TraceWriter,
};
use activeloc::lidar::{LidarConfig, ScanMatrix};
use activeloc::likelihood::LikelihoodProvider;
use activeloc::mapgen::{read_map, write_map, GridMap, MapSpec};
use activeloc::policy::PolicyProvider;
use activeloc::rng::derive_seed;
use activeloc::wire::{Connection, RemoteLikelihood, RemotePolicy, ServedMap, Server, DEFAULT_TIMEOUT};

use crate::config::{LikelihoodChoice, PolicyChoice, Precision, RunConfig};

/// Episode settings implied by a run configuration.
pub fn episode_config(cfg: &RunConfig) -> EpisodeConfig {
    EpisodeConfig {
        horizon: cfg.horizon,
        reward: cfg.reward,
        beta: cfg.beta,
        ..EpisodeConfig::with_profile(cfg.noise_profile)
    }
}

/// The maps a run uses with their seeds: the `--map` file, or `maps`
/// generated mazes.
pub fn load_maps(cfg: &RunConfig) -> Result<Vec<ServedMap>> {
    if let Some(path) = &cfg.map {
        let (map, meta) = read_map(path).with_context(|| format!("reading map {}", path.display()))?;
        let id = path.file_stem().map_or("map".into(), |s| s.to_string_lossy().into_owned());
        return Ok(vec![ServedMap { id, map, seed: meta.seed }]);
    }
    let spec = MapSpec::for_grid(cfg.rows, cfg.cols, cfg.headings)?;
    (0..cfg.maps)
        .map(|j| {
            let seed = derive_seed(cfg.seed, "map", j as u64);
            Ok(ServedMap { id: format!("{j:05}"), map: spec.generate(seed)?, seed })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct MapManifestLine<'a> {
    id: &'a str,
    pgm: String,
    sidecar: String,
    seed: u64,
    free_cells: usize,
}

/// Writes `count` mazes as `<id>.pgm` plus sidecar, and `manifest.jsonl`.
pub fn cmd_gen_maps(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let spec = MapSpec::for_grid(cfg.rows, cfg.cols, cfg.headings)?;
    let mut manifest = BufWriter::new(File::create(cfg.out.join("manifest.jsonl"))?);
    let mut paths = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let id = format!("{i:05}");
        let seed = derive_seed(cfg.seed, "map", i as u64);
        let map = spec.generate(seed)?;
        let path = cfg.out.join(format!("{id}.pgm"));
        write_map(&map, &path, seed)?;
        let line = MapManifestLine {
            id: &id,
            pgm: format!("{id}.pgm"),
            sidecar: format!("{id}.json"),
            seed,
            free_cells: map.free_cell_count(),
        };
        serde_json::to_writer(&mut manifest, &line)?;
        manifest.write_all(b"\n")?;
        paths.push(path);
    }
    manifest.flush()?;
    info!("wrote {} maps to {}", cfg.count, cfg.out.display());
    Ok(paths)
}

pub fn cmd_gen_dataset(cfg: &RunConfig) -> Result<Vec<ManifestEntry>> {
    let dataset = DatasetConfig {
        n_maps: cfg.n_maps,
        poses_per_map: cfg.poses,
        map_spec: MapSpec::for_grid(cfg.rows, cfg.cols, cfg.headings)?,
        lidar: LidarConfig::default(),
        dr: if cfg.domain_randomization { DomainRandomization::default() } else { DomainRandomization::OFF },
        seed: cfg.seed,
    };
    let entries = generate_dataset(&dataset, &cfg.out)?;
    info!("wrote {} samples to {}", entries.len(), cfg.out.display());
    Ok(entries)
}

struct Prepared {
    truth: Arc<GridMap>,
    filter_map: Arc<GridMap>,
    matrix: Arc<ScanMatrix<f64>>,
    policy: Arc<dyn PolicyProvider<f64>>,
    likelihood: Option<Arc<dyn LikelihoodProvider<f64>>>,
}

/// One environment per map of the run, with its filter map and scan matrix
/// built. Episode `i` of [`evaluate`] runs on entry `i mod len`.
pub fn build_environments(cfg: &RunConfig) -> Result<Vec<Environment<f64>>> {
    let ecfg = episode_config(cfg);
    load_maps(cfg)?
        .into_iter()
        .enumerate()
        .map(|(j, served)| Ok(Environment::new(served.map, ecfg, derive_seed(served.seed, "filter", j as u64))?))
        .collect()
}

fn prepare(cfg: &RunConfig, ecfg: &EpisodeConfig) -> Result<Vec<Prepared>> {
    let remote_policy: Option<Arc<dyn PolicyProvider<f64>>> = match cfg.policy_choice()? {
        PolicyChoice::External => {
            let addr = cfg.policy_addr.as_deref().expect("validated");
            let conn =
                Connection::tcp(addr, DEFAULT_TIMEOUT).with_context(|| format!("connecting to policy at {addr}"))?;
            Some(Arc::new(RemotePolicy::new(conn, "external")))
        }
        PolicyChoice::Builtin(_) => None,
    };
    build_environments(cfg)?
        .into_iter()
        .map(|env| {
            let (truth, filter_map, matrix) =
                (Arc::clone(env.truth_map()), Arc::clone(env.filter_map()), Arc::clone(env.matrix()));
            let policy = match (&remote_policy, cfg.policy_choice()?) {
                (Some(p), _) => Arc::clone(p),
                (None, PolicyChoice::Builtin(kind)) => Arc::from(kind.build(&matrix, ecfg.beta, ecfg.noise.motion)?),
                (None, PolicyChoice::External) => unreachable!(),
            };
            let likelihood: Option<Arc<dyn LikelihoodProvider<f64>>> = match cfg.likelihood {
                LikelihoodChoice::Sm => None,
                LikelihoodChoice::External => {
                    let addr = cfg.likelihood_addr.as_deref().expect("validated");
                    let conn = Connection::tcp(addr, DEFAULT_TIMEOUT)
                        .with_context(|| format!("connecting to likelihood model at {addr}"))?;
                    Some(Arc::new(RemoteLikelihood::new(conn, Arc::clone(&filter_map))?))
                }
            };
            Ok(Prepared { truth, filter_map, matrix, policy, likelihood })
        })
        .collect()
}

fn one_episode(p: &Prepared, ecfg: &EpisodeConfig, seed: u64, trace: Option<&Path>) -> Result<EpisodeRecord> {
    let mut env =
        Environment::with_parts(Arc::clone(&p.truth), Arc::clone(&p.filter_map), Arc::clone(&p.matrix), *ecfg)?;
    if let Some(l) = &p.likelihood {
        env = env.with_likelihood(Arc::clone(l))?;
    }
    let mut writer = trace.map(TraceWriter::create).transpose()?;
    let record = run_episode(&mut env, p.policy.as_ref(), seed, writer.as_mut())?;
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok(record)
}

/// Runs `episodes` episodes; episode `i` uses map `i mod maps` and seed
/// `derive_seed(seed, "episode", i)`, so runs with different policies are
/// paired. Traces go to `<trace_dir>/episode_<i>` when given.
pub fn evaluate(cfg: &RunConfig, trace_dir: Option<&Path>) -> Result<Vec<EpisodeRecord>> {
    let ecfg = episode_config(cfg);
    let prepared = prepare(cfg, &ecfg)?;
    let job = |i: usize| -> Result<EpisodeRecord> {
        let stem = trace_dir.map(|d| d.join(format!("episode_{i:05}")));
        one_episode(&prepared[i % prepared.len()], &ecfg, derive_seed(cfg.seed, "episode", i as u64), stem.as_deref())
            .with_context(|| format!("episode {i}"))
    };
    let remote = cfg.policy_choice()? == PolicyChoice::External || cfg.likelihood == LikelihoodChoice::External;
    if remote {
        (0..cfg.episodes).map(job).collect()
    } else {
        (0..cfg.episodes).into_par_iter().map(job).collect()
    }
}

/// Runs the episodes and writes `summary.csv`, `episodes.jsonl` and traces.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    ensure!(cfg.episodes > 0, "run needs at least one episode");
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let traces = cfg.out.join("traces");
    let records = evaluate(cfg, cfg.traces.then_some(traces.as_path()))?;

    let mut episodes = BufWriter::new(File::create(cfg.out.join("episodes.jsonl"))?);
    for r in &records {
        serde_json::to_writer(&mut episodes, r)?;
        episodes.write_all(b"\n")?;
    }
    episodes.flush()?;

    let summary_path = cfg.out.join("summary.csv");
    let rows = summarize(&records);
    let mut summary = BufWriter::new(File::create(&summary_path)?);
    write_summary_csv(&rows, &mut summary)?;
    summary.flush()?;
    drop(summary);
    let lines = BufReader::new(File::open(&summary_path)?).lines().count();
    if lines != cfg.horizon + 1 {
        bail!("{} has {lines} lines, expected a header and {} steps", summary_path.display(), cfg.horizon);
    }
    if let Some(last) = rows.last() {
        info!(
            "{} episodes of {}: hit rate {:.3}, wasserstein {:.3} at step {}",
            records.len(),
            cfg.policy,
            last.hit_mean,
            last.wasserstein_mean,
            last.step
        );
    }
    Ok(records)
}

/// Times each grid and writes `bench.csv`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    ensure!(!cfg.grids.is_empty(), "bench needs at least one grid");
    let grids: Vec<_> = cfg.grids.iter().map(|g| (g.0, g.1, g.2)).collect();
    let bench = BenchConfig {
        reps: cfg.reps,
        seed: cfg.seed,
        beta: cfg.beta,
        aml: cfg.bench_aml,
        lidar: LidarConfig::default(),
    };
    let rows = match cfg.precision {
        Precision::F32 => run_benchmark::<f32>(&grids, &bench)?,
        Precision::F64 => run_benchmark::<f64>(&grids, &bench)?,
    };
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut out = BufWriter::new(File::create(cfg.out.join("bench.csv"))?);
    write_bench_csv(&rows, &mut out)?;
    out.flush()?;
    for r in &rows {
        info!("{}x{}x{} {}: {:.6} s per likelihood", r.headings, r.rows, r.cols, r.precision, r.sm_seconds);
    }
    Ok(rows)
}

/// Builds the server a `serve` invocation would run.
pub fn build_server(cfg: &RunConfig) -> Result<Server<f64>> {
    let mut server = Server::new(load_maps(cfg)?, episode_config(cfg))?;
    if let PolicyChoice::Builtin(kind) = cfg.policy_choice()? {
        server = server.with_policy(kind);
    }
    Ok(server)
}

/// Serves episodes on `serve_addr`, or on stdin/stdout with `stdio`.
pub fn cmd_serve(cfg: &RunConfig) -> Result<()> {
    let mut server = build_server(cfg)?;
    if cfg.stdio {
        server.serve_stdio()?;
    } else {
        info!("listening on {}", cfg.serve_addr);
        server.serve_tcp(cfg.serve_addr.as_str())?;
    }
    Ok(())
}
