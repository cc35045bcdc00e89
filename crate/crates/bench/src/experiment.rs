use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use kgrad::testbed::{sample_gp_function, TestFunction};
use kgrad::{run_bo, BoConfig, BoHistory, Variant};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, RUN_SEED_OFFSET};
use crate::records::{write_results, ResultRow};
use crate::summary::{summarize, write_summary, SummaryRow, CI_METHOD};

/// One (method, dimension, replication) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub variant: Variant,
    pub dim: usize,
    pub seed: u64,
}

impl Cell {
    pub fn run_seed(&self) -> u64 {
        RUN_SEED_OFFSET + self.seed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub method: String,
    pub dim: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentOutput {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let variants = cfg.variants()?;
    let seeds = cfg.seed_list();
    let mut out = Vec::with_capacity(variants.len() * cfg.dims.len() * seeds.len());
    for &variant in &variants {
        for &dim in &cfg.dims {
            for &seed in &seeds {
                out.push(Cell { variant, dim, seed });
            }
        }
    }
    Ok(out)
}


pub fn history_rows(cell: &Cell, history: &BoHistory) -> Vec<ResultRow> {
    let mut seen_acquisition = false;
    history
        .records
        .iter()
        .map(|r| {
            let initial = r.initial();
            let cold_start = !initial && !seen_acquisition;
            seen_acquisition |= !initial;
            ResultRow {
                method: cell.variant.name().to_string(),
                size_param: cell.variant.size(),
                dim: cell.dim,
                seed: cell.seed,
                run_seed: cell.run_seed(),
                iteration: r.iteration,
                initial,
                x: r.x.clone(),
                y: r.y,
                oc: r.oc,
                acq_value: r.acq_value,
                fallback: r.fallback,
                cold_start,
                acq_wall_time_s: r.acq_wall_time.as_secs_f64(),
                iter_wall_time_s: r.iter_wall_time.as_secs_f64(),
            }
        })
        .collect()
}

fn test_function(cfg: &ExperimentConfig, dim: usize, seed: u64) -> Result<TestFunction> {
    let k = &cfg.kernel;
    let f = sample_gp_function(dim, k.lengthscale, k.signal_variance, cfg.features, seed)?;
    f.optimum()?;
    Ok(f)
}

fn run_cell(cfg: &ExperimentConfig, f: &TestFunction, cell: &Cell) -> Result<Vec<ResultRow>> {
    let spec = cfg.spec(cell.variant)?;
    let mut bo = BoConfig::new(cfg.budget, cfg.kernel_for(cell.dim)?).with_initial(cfg.initial_for(cell.dim));
    bo.recommend = cfg.optimizer.recommend()?;
    let history = run_bo(f, &spec, &bo, cell.run_seed())?;
    Ok(history_rows(cell, &history))
}

/// Runs every cell of `cfg` and returns the sorted rows and their summary.
/// Failed cells are logged and reported in `failures`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let cells = cells(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .context("building worker pool")?;

    let keys: Vec<(usize, u64)> = cfg
        .dims
        .iter()
        .flat_map(|&d| cfg.seed_list().into_iter().map(move |s| (d, s)))
        .collect();
    let functions: BTreeMap<(usize, u64), Result<TestFunction, String>> = pool.install(|| {
        keys.par_iter()
            .map(|&(d, s)| ((d, s), test_function(cfg, d, s).map_err(|e| format!("{e:#}"))))
            .collect()
    });

    let results: Vec<(Cell, Result<Vec<ResultRow>, String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let out = match &functions[&(cell.dim, cell.seed)] {
                    Ok(f) => run_cell(cfg, f, cell).map_err(|e| format!("{e:#}")),
                    Err(e) => Err(format!("test function: {e}")),
                };
                log::debug!("finished {} D={} seed={}", cell.variant, cell.dim, cell.seed);
                (*cell, out)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cell, out) in results {
        match out {
            Ok(r) => rows.extend(r),
            Err(error) => {
                log::error!("cell {} D={} seed={} failed: {error}", cell.variant, cell.dim, cell.seed);
                failures.push(CellFailure {
                    method: cell.variant.to_string(),
                    dim: cell.dim,
                    seed: cell.seed,
                    error,
                });
            }
        }
    }
    rows.sort_by_key(|r| r.sort_key());
    let summary = summarize(&rows);
    Ok(ExperimentOutput { rows, summary, failures })
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    config: &'a ExperimentConfig,
    crate_versions: BTreeMap<&'static str, &'static str>,
    test_function_seeds: Vec<u64>,
    run_seeds: Vec<u64>,
    run_seed_offset: u64,
    ci_method: &'static str,
    qmc_generator: &'static str,
    timing_mode: String,
    timing_clock: &'static str,
    workers: usize,
    cells: usize,
    rows: usize,
    failures: &'a [CellFailure],
}

/// Writes `results.csv`, `summary.csv` and `meta.json` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let results = dir.join("results.csv");
    write_results(fs::File::create(&results)?, &out.rows).with_context(|| format!("writing {}", results.display()))?;
    let summary = dir.join("summary.csv");
    write_summary(fs::File::create(&summary)?, &out.summary).with_context(|| format!("writing {}", summary.display()))?;

    let seeds = cfg.seed_list();
    let meta = Meta {
        config: cfg,
        crate_versions: BTreeMap::from([
            ("kgrad", kgrad::VERSION),
            ("kgrad-bench", env!("CARGO_PKG_VERSION")),
        ]),
        run_seeds: seeds.iter().map(|s| RUN_SEED_OFFSET + s).collect(),
        test_function_seeds: seeds,
        run_seed_offset: RUN_SEED_OFFSET,
        ci_method: CI_METHOD,
        qmc_generator: kgrad::qmc::GENERATOR,
        timing_mode: cfg.timing_mode.to_string(),
        timing_clock: "monotonic (std::time::Instant), per acquisition-optimization call",
        workers: cfg.worker_count(),
        cells: cells(cfg)?.len(),
        rows: out.rows.len(),
        failures: &out.failures,
    };
    let path = dir.join("meta.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
