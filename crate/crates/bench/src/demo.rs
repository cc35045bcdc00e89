use std::fs;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use kgrad::acquisition::{epigraph_expectation, kg_discrete, kg_hybrid, kg_mc, Discretization, KgContext, ZSet};
use kgrad::gp::{Dataset, KernelConfig, PosteriorGp};
use kgrad::OptimizerConfig;
use serde::Serialize;

use crate::records::fmt_f64;

pub const DEMO_X_NEW: f64 = 0.7;
pub const GRID_POINTS: usize = 1001;
pub const DISCRETE_POINTS: usize = 11;
pub const HYBRID_Z: usize = 5;
pub const SAMPLED_CURVES: usize = 4;
pub const MC_Z: usize = 1000;
const DEMO_SEED: u64 = 7;

/// A 1-D posterior with five noisy observations on `[0, 1]`.
pub fn demo_fixture() -> Result<PosteriorGp<f64>> {
    let xs = [0.05, 0.25, 0.45, 0.6, 0.9];
    let ys = [-0.4, 0.5, 0.1, 0.9, -0.2];
    let data = Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec())?;
    let kernel = KernelConfig::isotropic_se(1, 1.0, 0.1, 1e-3)?;
    Ok(PosteriorGp::fit(data, kernel, 0.0)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub x_new: f64,
    pub incumbent: f64,
    pub incumbent_value: f64,
    pub kg_discrete: f64,
    pub kg_hybrid: f64,
    pub kg_mc: f64,
    pub mc_samples: usize,
}

fn grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 / (GRID_POINTS - 1) as f64).collect()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the data needed to redraw the knowledge-gradient construction at
/// `x_new` for a 1-D posterior:
///
/// - `observations.csv`: training data.
/// - `posterior.csv`: `μ^n`, posterior sd and `σ̃(·; x_new)` on a grid.
/// - `fantasies.csv`: fantasy means `μ^n + σ̃ z` on the grid, one curve per
///   z (the quantile set used by the hybrid method, which contains `z = 0`,
///   plus a few sampled z values).
/// - `kg_lines.csv`: intercept and slope of each discrete-KG line.
/// - `epigraph.csv`: the lines on the upper envelope with the z interval on
///   which each is maximal.
/// - `hybrid.csv`: argmax and maximum of each quantile fantasy.
/// - `kg_values.json`: the KG estimates.
pub fn demo_emit(gp: &PosteriorGp<f64>, x_new: f64, out: &Path) -> Result<DemoSummary> {
    ensure!(gp.dim() == 1, "demo needs a 1-D posterior, got D = {}", gp.dim());
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let opt = OptimizerConfig::inner().with_restarts(20).with_max_iters(200);
    let ctx = KgContext::new(gp, &opt)?;
    let xn = [x_new];
    let anchor = gp.anchor(&xn)?;
    let grid = grid();

    write_csv(
        &out.join("observations.csv"),
        &["x", "y"],
        gp.data().inputs().iter().zip(gp.data().outputs()).map(|(x, &y)| vec![fmt_f64(x[0]), fmt_f64(y)]),
    )?;

    let mut posterior = Vec::with_capacity(grid.len());
    let mut mus = Vec::with_capacity(grid.len());
    let mut sts = Vec::with_capacity(grid.len());
    for &x in &grid {
        let mu = gp.mean(&[x])?;
        let sd = gp.variance(&[x])?.max(0.0).sqrt();
        let st = anchor.sigma_tilde(&[x]);
        mus.push(mu);
        sts.push(st);
        posterior.push(vec![fmt_f64(x), fmt_f64(mu), fmt_f64(sd), fmt_f64(st)]);
    }
    write_csv(&out.join("posterior.csv"), &["x", "mu", "sd", "sigma_tilde"], posterior)?;

    let quantiles = ZSet::quantiles(HYBRID_Z)?;
    let sampled = ZSet::<f64>::monte_carlo(SAMPLED_CURVES, DEMO_SEED)?;
    let curves: Vec<(&str, f64)> = quantiles
        .values
        .iter()
        .map(|&z| ("quantile", z))
        .chain(sampled.values.iter().map(|&z| ("sampled", z)))
        .collect();
    let mut fantasy_rows = Vec::with_capacity(curves.len() * grid.len());
    for (c, &(kind, z)) in curves.iter().enumerate() {
        for (i, &x) in grid.iter().enumerate() {
            let v = mus[i] + sts[i] * z;
            fantasy_rows.push(vec![c.to_string(), kind.to_string(), fmt_f64(z), fmt_f64(x), fmt_f64(v)]);
        }
    }
    write_csv(&out.join("fantasies.csv"), &["curve", "kind", "z", "x", "value"], fantasy_rows)?;

    let disc = Discretization::new(
        (0..DISCRETE_POINTS).map(|i| vec![i as f64 / (DISCRETE_POINTS - 1) as f64]).collect(),
        true,
    )?;
    let points = disc.resolve(&ctx);
    let mu: Vec<f64> = points.iter().map(|p| gp.mean(p)).collect::<kgrad::Result<_>>()?;
    let sigma: Vec<f64> = points.iter().map(|p| anchor.sigma_tilde(p)).collect();
    let env = epigraph_expectation(&mu, &sigma)?;
    write_csv(
        &out.join("kg_lines.csv"),
        &["line", "x", "intercept", "slope", "on_envelope"],
        points.iter().enumerate().map(|(i, p)| {
            vec![
                i.to_string(),
                fmt_f64(p[0]),
                fmt_f64(mu[i]),
                fmt_f64(sigma[i]),
                env.kept.contains(&i).to_string(),
            ]
        }),
    )?;
    write_csv(
        &out.join("epigraph.csv"),
        &["segment", "line", "z_from", "z_to"],
        env.kept.iter().enumerate().map(|(k, &i)| {
            vec![
                k.to_string(),
                i.to_string(),
                fmt_f64(env.intersections[k]),
                fmt_f64(env.intersections[k + 1]),
            ]
        }),
    )?;

    let hybrid = kg_mc(&ctx, &xn, &quantiles, &opt)?;
    write_csv(
        &out.join("hybrid.csv"),
        &["curve", "z", "argmax_x", "max_value"],
        quantiles.values.iter().enumerate().map(|(j, &z)| {
            vec![
                j.to_string(),
                fmt_f64(z),
                fmt_f64(hybrid.argmaxes[j][0]),
                fmt_f64(hybrid.maxima[j]),
            ]
        }),
    )?;

    let summary = DemoSummary {
        x_new,
        incumbent: ctx.incumbent()[0],
        incumbent_value: ctx.incumbent_value(),
        kg_discrete: kg_discrete(&ctx, &xn, &disc)?,
        kg_hybrid: kg_hybrid(&ctx, &xn, HYBRID_Z, &opt)?.0,
        kg_mc: kg_mc(&ctx, &xn, &ZSet::monte_carlo(MC_Z, DEMO_SEED)?, &opt)?.value,
        mc_samples: MC_Z,
    };
    fs::write(out.join("kg_values.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
