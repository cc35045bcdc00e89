use std::collections::BTreeMap;
use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use crate::records::{fmt_f64, fmt_opt, ResultRow};

pub const CI_METHOD: &str = "normal approximation: mean ± 1.96·se, se = sample sd / √n";
pub const CI_Z: f64 = 1.96;
/// Floor applied before taking log10 of an opportunity cost.
pub const LOG_OC_FLOOR: f64 = 1e-12;

/// Mean with a normal-approximation 95% interval. `se` and the interval are
/// `None` when fewer than two values are given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

pub fn mean_ci(values: &[f64]) -> Option<MeanCi> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = (n > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64 / n as f64).sqrt()
    });
    let ci = se.map(|s| (mean - CI_Z * s, mean + CI_Z * s));
    Some(MeanCi { n, mean, se, ci })
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Aggregate over the replications of one (method, size, dimension) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub size_param: Option<usize>,
    pub dim: usize,
    pub final_oc: MeanCi,
    pub mean_log10_oc: f64,
    /// Over acquisition calls, cold starts excluded.
    pub median_acq_wall_time_s: Option<f64>,
    /// Over acquisition iterations, cold starts excluded.
    pub median_iter_wall_time_s: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "method",
    "size_param",
    "dim",
    "n",
    "mean_oc",
    "se_oc",
    "ci_low",
    "ci_high",
    "mean_log10_oc",
    "median_acq_wall_time_s",
    "median_iter_wall_time_s",
];

type GroupKey = (String, Option<usize>, usize);

/// Groups rows by (method, size, dimension) and aggregates the last
/// iteration of each replication.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut finals: BTreeMap<GroupKey, BTreeMap<u64, (usize, f64)>> = BTreeMap::new();
    let mut acq: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), r.size_param, r.dim);
        let last = finals.entry(key.clone()).or_default().entry(r.seed).or_insert((r.iteration, r.oc));
        if r.iteration >= last.0 {
            *last = (r.iteration, r.oc);
        }
        let times = acq.entry(key).or_default();
        if !r.initial && !r.cold_start {
            times.0.push(r.acq_wall_time_s);
            times.1.push(r.iter_wall_time_s);
        }
    }
    finals
        .into_iter()
        .filter_map(|(key, per_seed)| {
            let ocs: Vec<f64> = per_seed.values().map(|&(_, oc)| oc).collect();
            let Some(final_oc) = mean_ci(&ocs) else {
                log::warn!("empty group {key:?} omitted");
                return None;
            };
            let mean_log10_oc = ocs.iter().map(|oc| oc.max(LOG_OC_FLOOR).log10()).sum::<f64>() / ocs.len() as f64;
            let (mut a, mut it) = acq.remove(&key).unwrap_or_default();
            let (method, size_param, dim) = key;
            Some(SummaryRow {
                method,
                size_param,
                dim,
                final_oc,
                mean_log10_oc,
                median_acq_wall_time_s: median(&mut a),
                median_iter_wall_time_s: median(&mut it),
            })
        })
        .collect()
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let ci = r.final_oc.ci;
        out.write_record([
            r.method.clone(),
            r.size_param.map(|s| s.to_string()).unwrap_or_default(),
            r.dim.to_string(),
            r.final_oc.n.to_string(),
            fmt_f64(r.final_oc.mean),
            fmt_opt(r.final_oc.se),
            fmt_opt(ci.map(|c| c.0)),
            fmt_opt(ci.map(|c| c.1)),
            fmt_f64(r.mean_log10_oc),
            fmt_opt(r.median_acq_wall_time_s),
            fmt_opt(r.median_iter_wall_time_s),
        ])?;
    }
    out.flush()?;
    Ok(())
}
