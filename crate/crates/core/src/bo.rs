//! The sequential Bayesian-optimization driver: Latin-hypercube start, then
//! one acquisition-chosen evaluation per iteration, refitting the GP each time
//! and recommending the peak of the posterior mean.

use std::time::{Duration, Instant};

use crate::acquisition::{find_incumbent, next_point, AcquisitionSpec, KgContext};
use crate::error::{ensure, Result};
use crate::gp::{Dataset, KernelConfig, PosteriorGp};
use crate::optimizer::OptimizerConfig;
use crate::qmc;
use crate::testbed::{latin_hypercube, TestFunction};
use crate::Scalar;

const DESIGN_STREAM: u64 = 21;
const ACQ_STREAM: u64 = 22;

/// Budget and model settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    /// Total black-box evaluations, initial design included.
    pub budget: usize,
    pub initial: usize,
    pub kernel: KernelConfig<f64>,
    /// Used for the incumbent and the final recommendation.
    pub recommend: OptimizerConfig,
}

impl BoConfig {
    /// `2 (D + 1)` initial points and the given kernel.
    pub fn new(budget: usize, kernel: KernelConfig<f64>) -> Self {
        let initial = 2 * (kernel.dim() + 1);
        Self {
            budget,
            initial,
            kernel,
            recommend: OptimizerConfig::inner(),
        }
    }

    pub fn with_initial(mut self, initial: usize) -> Self {
        self.initial = initial;
        self
    }
}

/// One evaluation of the black box.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// 1-based; equals the dataset size after this evaluation.
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    /// Opportunity cost of the recommendation made after this evaluation.
    pub oc: f64,
    pub recommendation: Vec<f64>,
    /// `None` for initial-design points.
    pub acq_value: Option<f64>,
    /// Time inside the acquisition optimizer.
    pub acq_wall_time: Duration,
    /// Refit, incumbent search, acquisition and evaluation together.
    pub iter_wall_time: Duration,
    pub fallback: bool,
}

impl RunRecord {
    pub fn initial(&self) -> bool {
        self.acq_value.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoHistory {
    pub records: Vec<RunRecord>,
    pub recommendation: Vec<f64>,
    /// Posterior mean at the recommendation.
    pub predicted: f64,
    /// Black-box value at the recommendation.
    pub true_value: f64,
    pub oc: f64,
}

/// `argmax_x μ^n(x)` by multi-restart ascent.
pub fn recommend<T: Scalar>(gp: &PosteriorGp<T>, cfg: &OptimizerConfig) -> Result<Vec<T>> {
    Ok(find_incumbent(gp, cfg)?.0)
}

fn refit(data: &Dataset<f64>, kernel: &KernelConfig<f64>) -> Result<PosteriorGp<f64>> {
    PosteriorGp::fit_with_output_mean(data.clone(), kernel.clone())
}

/// Runs BO on `f` until `cfg.budget` evaluations are spent. Deterministic in
/// `(f, spec, cfg, seed)` apart from the recorded wall times.
pub fn run_bo(f: &TestFunction, spec: &AcquisitionSpec, cfg: &BoConfig, seed: u64) -> Result<BoHistory> {
    ensure(cfg.initial >= 1 && cfg.initial <= cfg.budget, || {
        format!("need 1 ≤ initial ({}) ≤ budget ({})", cfg.initial, cfg.budget)
    })?;
    ensure(cfg.kernel.dim() == f.dim(), || {
        format!("kernel has dimension {}, function {}", cfg.kernel.dim(), f.dim())
    })?;
    spec.validate()?;
    let best = f.optimum()?.1;

    let design = latin_hypercube::<f64>(cfg.initial, f.dim(), qmc::substream(seed, DESIGN_STREAM))?;
    let mut records = Vec::with_capacity(cfg.budget);
    let mut data: Option<Dataset<f64>> = None;
    let mut incumbent = Vec::new();
    for x in design {
        let clock = Instant::now();
        let y = f.eval(&x);
        match &mut data {
            None => data = Some(Dataset::new(vec![x.clone()], vec![y])?),
            Some(d) => d.push(x.clone(), y)?,
        }
        let gp = refit(data.as_ref().expect("set above"), &cfg.kernel)?;
        incumbent = recommend(&gp, &cfg.recommend)?;
        records.push(RunRecord {
            iteration: records.len() + 1,
            oc: best - f.eval(&incumbent),
            recommendation: incumbent.clone(),
            x,
            y,
            acq_value: None,
            acq_wall_time: Duration::ZERO,
            iter_wall_time: clock.elapsed(),
            fallback: false,
        });
    }
    let mut data = data.expect("initial design is nonempty");

    while records.len() < cfg.budget {
        let clock = Instant::now();
        let gp = refit(&data, &cfg.kernel)?;
        let ctx = KgContext::with_incumbent(&gp, incumbent.clone())?;
        let iteration = records.len() + 1;
        let p = next_point(&ctx, spec, qmc::substream(seed, ACQ_STREAM + iteration as u64))?;
        let y = f.eval(&p.x);
        data.push(p.x.clone(), y)?;
        let gp = refit(&data, &cfg.kernel)?;
        incumbent = recommend(&gp, &cfg.recommend)?;
        records.push(RunRecord {
            iteration,
            oc: best - f.eval(&incumbent),
            recommendation: incumbent.clone(),
            x: p.x,
            y,
            acq_value: Some(p.value),
            acq_wall_time: p.wall_time,
            iter_wall_time: clock.elapsed(),
            fallback: p.fallback,
        });
    }

    let gp = refit(&data, &cfg.kernel)?;
    let predicted = gp.mean(&incumbent)?;
    let true_value = f.eval(&incumbent);
    Ok(BoHistory {
        records,
        oc: best - true_value,
        recommendation: incumbent,
        predicted,
        true_value,
    })
}
