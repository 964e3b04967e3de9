use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use recom::analyze::{cmd_analyze, AnalyzeInputs};
use recom::config::{gamma_grid, RunConfig};
use recom::graph_file::{load_graph, write_graph};
use recom::run::{cmd_reservoir, cmd_sample, cmd_temper, Context, RunOptions};
use recom::CliError;
use recom_core::merge::{merge_multipolygon_units, MergeOptions};
use recom_core::tempering::BaseRung;

/// Tempered recombination sampling of balanced, contiguous partitions.
#[derive(Parser, Debug)]
#[command(name = "recom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Merge multi-polygon units and write a cleaned, canonical graph.
    Preprocess(PreprocessArgs),
    /// Build the gamma = 0 reservoir.
    Reservoir(RunArgs),
    /// Run the tempered ladder.
    Temper(RunArgs),
    /// Run a single chain at one gamma.
    Sample(RunArgs),
    /// Compare an ensemble with a reference plan.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    input: PathBuf,
    output: PathBuf,
    /// Merge report (JSON); defaults to `<output>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000.0)]
    pop_cap: f64,
    /// Fold pieces lying in another county into a neighbour.
    #[arg(long)]
    absorb_isolated: bool,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    districts: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    /// Evenly spaced gammas from 0 to 1.
    #[arg(long)]
    gamma_levels: Option<usize>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_splits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    swap_interval: Option<u64>,
    #[arg(long)]
    subsample: Option<u64>,
    /// Use a live chain as the bottom rung instead of the reservoir.
    #[arg(long)]
    live_base: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $field:expr) => {
                if let Some(v) = self.$flag.clone() {
                    $field = v;
                }
            };
        }
        set!(graph => cfg.graph);
        set!(districts => cfg.districts);
        set!(steps => cfg.steps);
        set!(w => cfg.w);
        set!(tolerance => cfg.pop_tolerance);
        set!(max_splits => cfg.max_county_splits);
        set!(seed => cfg.seed);
        set!(swap_interval => cfg.swap_interval);
        set!(subsample => cfg.subsample_every);
        set!(out => cfg.out);
        if let Some(n) = self.gamma_levels {
            if n < 2 {
                return Err(CliError::Usage("--gamma-levels needs at least 2".into()));
            }
            cfg.gammas = gamma_grid(n);
        }
        if self.live_base {
            cfg.base = BaseRung::Live;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Worker threads; never changes results.
    #[arg(long)]
    threads: Option<usize>,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Stop with a checkpoint once chains reach this many steps.
    #[arg(long)]
    stop_after: Option<u64>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Defaults to the ladder output, or the single-chain output.
    #[arg(long)]
    ensemble: Option<PathBuf>,
    /// Defaults to the config's reference plan.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Independent ensembles for the convergence table.
    #[arg(long)]
    compare: Vec<PathBuf>,
    /// Table directory; defaults to `<out>/analysis`.
    #[arg(long)]
    tables: Option<PathBuf>,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions { resume: self.resume, stop_after: self.stop_after, threads: self.threads }
    }
}

fn preprocess(args: &PreprocessArgs) -> Result<(), CliError> {
    let g = load_graph(&args.input)?;
    let options = MergeOptions { pop_cap: args.pop_cap, absorb_isolated: args.absorb_isolated };
    let (merged, report) = merge_multipolygon_units(&g, &options)?;
    write_graph(&args.output, &merged)?;
    let report_path = args.report.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".report.json");
        p.into()
    });
    recom::checkpoint::write_json(&report_path, &report)?;
    info!("{} units -> {} units", g.num_units(), merged.num_units());
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let ctx = Context::load(args.overrides.config()?)?;
    let out = &ctx.cfg.out;
    let ensemble = args.ensemble.clone().unwrap_or_else(|| {
        let ladder = out.join("ladder.jsonl");
        if ladder.exists() {
            ladder
        } else {
            out.join("ensemble.jsonl")
        }
    });
    let reference = args
        .reference
        .clone()
        .or_else(|| ctx.cfg.reference_plan.clone())
        .ok_or_else(|| CliError::Usage("no reference plan: pass --reference or set reference_plan".into()))?;
    let inputs = AnalyzeInputs {
        ensemble,
        reference,
        compare: args.compare.clone(),
        out: args.tables.clone().unwrap_or_else(|| out.join("analysis")),
    };
    let manifest = cmd_analyze(&ctx, &inputs)?;
    info!("{} tables for {} plans in {}", manifest.artifacts.len(), manifest.plans, inputs.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Reservoir(a) => cmd_reservoir(&Context::load(a.overrides.config()?)?, &a.options()).map(drop),
        Command::Temper(a) => cmd_temper(&Context::load(a.overrides.config()?)?, &a.options()).map(drop),
        Command::Sample(a) => cmd_sample(&Context::load(a.overrides.config()?)?, &a.options()).map(drop),
        Command::Analyze(a) => analyze(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
