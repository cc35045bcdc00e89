use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use kgrad_bench::config::parse_seeds;
use kgrad_bench::{demo_emit, demo_fixture, read_results, run_experiment, summarize, write_outputs, write_summary};
use kgrad_bench::{ExperimentConfig, TimingMode};

#[derive(Parser)]
#[command(version, about = "Knowledge-gradient Bayesian optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method × dimension × seed grid.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Comma-separated methods, e.g. `disc:3,osh:10,random`.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// `a..b` or a comma-separated list of replication seeds.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        initial: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        jobs: Option<usize>,
        /// `parallel` or `pinned` (single worker).
        #[arg(long)]
        timing_mode: Option<TimingMode>,
    },
    /// Emit data files for the 1-D knowledge-gradient illustration.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = kgrad_bench::demo::DEMO_X_NEW)]
        x_new: f64,
    },
    /// Recompute a summary from a results file.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            preset,
            methods,
            dims,
            seeds,
            budget,
            initial,
            out,
            jobs,
            timing_mode,
        } => {
            let mut cfg = ExperimentConfig::load(&config, &preset)?;
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(d) = dims {
                cfg.dims = d;
            }
            if let Some(s) = seeds {
                let s = parse_seeds(&s)?;
                cfg.replications = s.len();
                cfg.seeds = Some(s);
            }
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if initial.is_some() {
                cfg.initial = initial;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if let Some(t) = timing_mode {
                cfg.timing_mode = t;
            }
            cfg.validate()?;
            log::info!(
                "running {} methods × {} dims × {} seeds on {} workers",
                cfg.methods.len(),
                cfg.dims.len(),
                cfg.seed_list().len(),
                cfg.worker_count()
            );
            let output = run_experiment(&cfg)?;
            write_outputs(&cfg.out, &cfg, &output)?;
            log::info!("wrote {} rows to {}", output.rows.len(), cfg.out.display());
            if output.complete() {
                Ok(ExitCode::SUCCESS)
            } else {
                log::error!("{} cells failed; see meta.json", output.failures.len());
                Ok(ExitCode::from(2))
            }
        }
        Command::Demo { out, x_new } => {
            let s = demo_emit(&demo_fixture()?, x_new, &out)?;
            log::info!("KG at {}: discrete {:.6}, hybrid {:.6}, MC {:.6}", s.x_new, s.kg_discrete, s.kg_hybrid, s.kg_mc);
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { input, out } => {
            let file = std::fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let rows = read_results(file)?;
            anyhow::ensure!(!rows.is_empty(), "{} has no rows", input.display());
            let summary = summarize(&rows);
            write_summary(std::fs::File::create(&out)?, &summary)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
