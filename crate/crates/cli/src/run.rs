//! Sampling commands: single chains, the reservoir, and tempered ladders.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use recom_core::chain::{initial_plan, run_chain, RunStats};
use recom_core::tempering::{BaseRung, Ladder, Replica, SwapStats};
use recom_core::{ChainState, MeasureParams, RegionGraph};
use serde::Serialize;

use crate::checkpoint::{check_hash, read_json, write_json, ChainCheckpoint, LadderCheckpoint, ReplicaCheckpoint, StateSnapshot};
use crate::config::RunConfig;
use crate::ensemble::{load_reservoir, EnsembleLine, EnsembleWriter};
use crate::error::CliError;
use crate::graph_file::{parse_graph, read_plan};

/// Random stream ids under the master seed.
pub mod streams {
    pub const SAMPLE: u64 = 1;
    pub const RESERVOIR: u64 = 1_000;
    pub const REPLICA: u64 = 2_000;
    pub const COORDINATOR: u64 = 3_000;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Flags that change how a run proceeds but not what it produces.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Stop (with a checkpoint) once chains reach this many steps.
    pub stop_after: Option<u64>,
    pub threads: Option<usize>,
}

impl RunOptions {
    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Runtime(e.to_string()))
    }

    fn target(&self, steps: u64) -> u64 {
        self.stop_after.map_or(steps, |s| s.min(steps))
    }
}

/// A validated config with its graph and provenance hash.
pub struct Context {
    pub cfg: RunConfig,
    pub graph: RegionGraph,
    pub hash: String,
}

impl Context {
    pub fn load(cfg: RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let bytes = fs::read(&cfg.graph).map_err(|e| CliError::io(&cfg.graph, e))?;
        let text = String::from_utf8(bytes).map_err(|e| CliError::invalid(&cfg.graph, e))?;
        let graph = parse_graph(&text).map_err(|e| CliError::invalid(&cfg.graph, e))?;
        let hash = cfg.hash(text.as_bytes());
        Ok(Context { cfg, graph, hash })
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let out = self.cfg.out.as_path();
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        fs::write(out.join("config.toml"), self.cfg.to_toml()).map_err(|e| CliError::io(out, e))?;
        Ok(out)
    }

    /// Feasible starting state: the configured plan or a generated one, with
    /// a uniform forest.
    pub fn initial_state(&self, p: &MeasureParams, rng: &mut ChaCha8Rng) -> Result<ChainState, CliError> {
        let g = &self.graph;
        let plan = match &self.cfg.initial_plan {
            Some(path) => {
                let plan = read_plan(path, g)?;
                if plan.num_districts() != p.districts {
                    return Err(CliError::invalid(
                        path,
                        format!("plan has {} districts, config asks for {}", plan.num_districts(), p.districts),
                    ));
                }
                plan
            }
            None => initial_plan(g, p, self.cfg.initial_attempts, rng)?,
        };
        Ok(ChainState::with_random_forest(g, plan, p, rng)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub config_hash: String,
    pub gamma: f64,
    pub step: u64,
    pub emitted: u64,
    pub stats: RunStats,
}

struct ChainFiles {
    ensemble: PathBuf,
    checkpoint: PathBuf,
}

/// Runs one chain to `target` steps with periodic checkpoints. States at or
/// before `burn` steps are not written.
fn run_single(
    ctx: &Context,
    p: &MeasureParams,
    stream: u64,
    files: &ChainFiles,
    resume: bool,
    target: u64,
    burn: u64,
) -> Result<ChainSummary, CliError> {
    let g = &ctx.graph;
    let cfg = &ctx.cfg;
    let (mut state, mut rng, mut writer, mut stats) = if resume {
        let ck: ChainCheckpoint = read_json(&files.checkpoint)?;
        check_hash(&files.checkpoint, &ck.config_hash, &ctx.hash)?;
        let state = ck.state.restore(g, p)?;
        let writer = EnsembleWriter::resume(&files.ensemble, ck.emitted)?;
        (state, ck.rng, writer, ck.stats)
    } else {
        let mut rng = stream_rng(cfg.seed, stream);
        let state = ctx.initial_state(p, &mut rng)?;
        (state, rng, EnsembleWriter::create(&files.ensemble)?, RunStats::default())
    };
    while state.step < target {
        let every = cfg.checkpoint_every;
        let n = (every - state.step % every).min(target - state.step);
        let chunk = run_chain(g, &mut state, n, cfg.subsample_every, p, &mut rng, |s: &ChainState| {
            if s.step > burn {
                let id = writer.written();
                writer.write(&EnsembleLine::from_state(g, s, id, p.gamma))?;
            }
            Ok::<(), CliError>(())
        })?;
        accumulate(&mut stats, &chunk);
        writer.flush()?;
        let ck = ChainCheckpoint {
            config_hash: ctx.hash.clone(),
            emitted: writer.written(),
            rng: rng.clone(),
            state: StateSnapshot::of(&state),
            stats,
        };
        write_json(&files.checkpoint, &ck)?;
        info!("{}: step {} of {}", files.ensemble.display(), state.step, target);
    }
    Ok(ChainSummary { config_hash: ctx.hash.clone(), gamma: p.gamma, step: state.step, emitted: writer.written(), stats })
}

fn accumulate(total: &mut RunStats, chunk: &RunStats) {
    total.steps += chunk.steps;
    total.accepted += chunk.accepted;
    total.self_loops += chunk.self_loops;
    total.infeasible += chunk.infeasible;
    total.emitted += chunk.emitted;
}

/// A single chain at the sampling gamma. Writes `ensemble.jsonl`.
pub fn cmd_sample(ctx: &Context, opts: &RunOptions) -> Result<ChainSummary, CliError> {
    let out = ctx.out_dir()?;
    let p = ctx.cfg.params(ctx.cfg.sample_gamma());
    let files = ChainFiles { ensemble: out.join("ensemble.jsonl"), checkpoint: out.join("sample.checkpoint.json") };
    let summary = run_single(ctx, &p, streams::SAMPLE, &files, opts.resume, opts.target(ctx.cfg.steps), 0)?;
    write_json(&out.join("sample.summary.json"), &summary)?;
    Ok(summary)
}

/// Independent `gamma = 0` chains, pooled into `reservoir.jsonl` in chain
/// order once every chain has finished.
pub fn cmd_reservoir(ctx: &Context, opts: &RunOptions) -> Result<Vec<ChainSummary>, CliError> {
    let out = ctx.out_dir()?;
    let dir = out.join("reservoir");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let res_cfg = &ctx.cfg.reservoir;
    let p = ctx.cfg.params(0.0);
    let burn = (res_cfg.steps as f64 * res_cfg.burn_in) as u64;
    let target = opts.target(res_cfg.steps);
    let mut chain_cfg = ctx.cfg.clone();
    chain_cfg.subsample_every = res_cfg.subsample_every;
    let chain_ctx = Context { cfg: chain_cfg, graph: ctx.graph.clone(), hash: ctx.hash.clone() };
    let summaries: Vec<Result<ChainSummary, CliError>> = opts.pool()?.install(|| {
        (0..res_cfg.chains)
            .into_par_iter()
            .map(|i| {
                let files = ChainFiles {
                    ensemble: dir.join(format!("chain_{i}.jsonl")),
                    checkpoint: dir.join(format!("chain_{i}.checkpoint.json")),
                };
                run_single(&chain_ctx, &p, streams::RESERVOIR + i as u64, &files, opts.resume, target, burn)
            })
            .collect()
    });
    let summaries = summaries.into_iter().collect::<Result<Vec<_>, _>>()?;
    if summaries.iter().all(|s| s.step >= res_cfg.steps) {
        let pooled = ctx.cfg.reservoir_path();
        let mut writer = EnsembleWriter::create(&pooled)?;
        for i in 0..res_cfg.chains {
            crate::ensemble::for_each_line(&dir.join(format!("chain_{i}.jsonl")), |mut line| {
                line.plan_id = writer.written();
                writer.write(&line)
            })?;
        }
        writer.flush()?;
        info!("reservoir: {} plans in {}", writer.written(), pooled.display());
    }
    write_json(&out.join("reservoir.summary.json"), &summaries)?;
    Ok(summaries)
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderSummary {
    pub config_hash: String,
    pub gammas: Vec<f64>,
    pub base: BaseRung,
    pub step: u64,
    pub rounds: u64,
    pub emitted: u64,
    pub swaps: SwapStats,
    pub swap_rates: Vec<f64>,
    pub replica_stats: Vec<RunStats>,
}

/// Tempered ladder; the top rung's subsampled states go to `ladder.jsonl`.
pub fn cmd_temper(ctx: &Context, opts: &RunOptions) -> Result<LadderSummary, CliError> {
    let out = ctx.out_dir()?;
    let cfg = &ctx.cfg;
    let g = &ctx.graph;
    let ens_path = out.join("ladder.jsonl");
    let ck_path = out.join("ladder.checkpoint.json");
    let reservoir = match cfg.base {
        BaseRung::Reservoir => Some(load_reservoir(&cfg.reservoir_path(), g, &cfg.params(0.0))?),
        BaseRung::Live => None,
    };
    let offset = usize::from(cfg.base == BaseRung::Reservoir);
    let count = cfg.gammas.len() - offset;
    let gamma_of = |i: usize| cfg.gammas[i + offset];

    let (mut ladder, mut coordinator, mut writer, mut replica_stats) = if opts.resume {
        let ck: LadderCheckpoint = read_json(&ck_path)?;
        check_hash(&ck_path, &ck.config_hash, &ctx.hash)?;
        if ck.replicas.len() != count {
            return Err(CliError::invalid(&ck_path, "replica count does not match the config"));
        }
        let mut replicas = Vec::with_capacity(count);
        let mut stats = Vec::with_capacity(count);
        for (i, r) in ck.replicas.into_iter().enumerate() {
            let state = r.state.restore(g, &cfg.params(gamma_of(i)))?;
            replicas.push(Replica { state, rng: r.rng });
            stats.push(r.stats);
        }
        let mut ladder = Ladder::new(cfg.gammas.clone(), replicas, cfg.swap_interval, cfg.params(1.0), cfg.base)?;
        ladder.round = ck.round;
        ladder.stats = ck.swaps;
        (ladder, ck.coordinator, EnsembleWriter::resume(&ens_path, ck.emitted)?, stats)
    } else {
        let mut replicas = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = stream_rng(cfg.seed, streams::REPLICA + i as u64);
            let state = ctx.initial_state(&cfg.params(gamma_of(i)), &mut rng)?;
            replicas.push(Replica { state, rng });
        }
        let ladder = Ladder::new(cfg.gammas.clone(), replicas, cfg.swap_interval, cfg.params(1.0), cfg.base)?;
        let coordinator = stream_rng(cfg.seed, streams::COORDINATOR);
        (ladder, coordinator, EnsembleWriter::create(&ens_path)?, vec![RunStats::default(); count])
    };

    let pool = opts.pool()?;
    let target = opts.target(cfg.steps);
    let params: Vec<MeasureParams> = (0..count).map(|i| ladder.params_of(i)).collect();
    let top = count - 1;
    let every = cfg.subsample_every;
    let mut done = ladder.replicas[0].state.step;
    while done < target {
        let n = (cfg.swap_interval - done % cfg.swap_interval).min(target - done);
        let results: Vec<Result<(Vec<EnsembleLine>, RunStats), CliError>> = pool.install(|| {
            ladder
                .replicas
                .par_iter_mut()
                .enumerate()
                .map(|(i, rep)| {
                    let mut lines = Vec::new();
                    let stats = rep.advance(g, &params[i], n, |s| {
                        if i == top && s.step % every == 0 {
                            lines.push(EnsembleLine::from_state(g, s, 0, params[i].gamma));
                        }
                    })?;
                    Ok((lines, stats))
                })
                .collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            let (lines, stats) = r?;
            accumulate(&mut replica_stats[i], &stats);
            for mut line in lines {
                line.plan_id = writer.written();
                writer.write(&line)?;
            }
        }
        let before = done;
        done += n;
        if done % cfg.swap_interval == 0 {
            ladder.exchange_round(g, reservoir.as_ref(), &mut coordinator)?;
        }
        if done / cfg.checkpoint_every > before / cfg.checkpoint_every || done == target {
            writer.flush()?;
            let ck = LadderCheckpoint {
                config_hash: ctx.hash.clone(),
                emitted: writer.written(),
                round: ladder.round,
                coordinator: coordinator.clone(),
                replicas: ladder
                    .replicas
                    .iter()
                    .zip(&replica_stats)
                    .map(|(r, s)| ReplicaCheckpoint { rng: r.rng.clone(), state: StateSnapshot::of(&r.state), stats: *s })
                    .collect(),
                swaps: ladder.stats.clone(),
            };
            write_json(&ck_path, &ck)?;
            info!("ladder: step {done} of {target}, swap rates {:?}", ladder.stats.rates());
        }
    }
    writer.flush()?;
    let summary = LadderSummary {
        config_hash: ctx.hash.clone(),
        gammas: cfg.gammas.clone(),
        base: cfg.base,
        step: done,
        rounds: ladder.round,
        emitted: writer.written(),
        swap_rates: ladder.stats.rates(),
        swaps: ladder.stats.clone(),
        replica_stats,
    };
    write_json(&out.join("ladder.summary.json"), &summary)?;
    Ok(summary)
}
