use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use kgrad::gp::KernelConfig;
use kgrad::{AcquisitionSpec, OptimizerConfig, StepRule, Variant};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelSettings {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    /// `quasi-newton` or `fixed-step`.
    pub step_rule: String,
    pub grad_tolerance: f64,
    pub outer_restarts: usize,
    pub outer_max_iters: usize,
    pub inner_restarts: usize,
    pub inner_max_iters: usize,
    pub recommend_restarts: usize,
    pub recommend_max_iters: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let outer = OptimizerConfig::acquisition();
        let inner = OptimizerConfig::inner();
        Self {
            step_rule: "quasi-newton".into(),
            grad_tolerance: inner.grad_tolerance,
            outer_restarts: outer.restarts,
            outer_max_iters: outer.max_iters,
            inner_restarts: inner.restarts,
            inner_max_iters: inner.max_iters,
            recommend_restarts: inner.restarts,
            recommend_max_iters: inner.max_iters,
        }
    }
}

impl OptimizerSettings {
    fn rule(&self) -> Result<StepRule> {
        match self.step_rule.as_str() {
            "quasi-newton" => Ok(StepRule::QuasiNewton),
            "fixed-step" => Ok(StepRule::FixedStepAscentWithBacktracking),
            other => bail!("unknown step rule `{other}` (quasi-newton or fixed-step)"),
        }
    }

    fn make(&self, restarts: usize, max_iters: usize) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            restarts,
            max_iters,
            grad_tolerance: self.grad_tolerance,
            step_rule: self.rule()?,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn outer(&self) -> Result<OptimizerConfig> {
        self.make(self.outer_restarts, self.outer_max_iters)
    }

    pub fn inner(&self) -> Result<OptimizerConfig> {
        self.make(self.inner_restarts, self.inner_max_iters)
    }

    pub fn recommend(&self) -> Result<OptimizerConfig> {
        self.make(self.recommend_restarts, self.recommend_max_iters)
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    /// Cells run on `jobs` worker threads.
    #[default]
    Parallel,
    /// One worker, for clean timing measurements.
    Pinned,
}

impl FromStr for TimingMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(TimingMode::Parallel),
            "pinned" => Ok(TimingMode::Pinned),
            _ => bail!("unknown timing mode `{s}` (parallel or pinned)"),
        }
    }
}

impl fmt::Display for TimingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimingMode::Parallel => "parallel",
            TimingMode::Pinned => "pinned",
        })
    }
}

fn default_features() -> usize {
    kgrad::testbed::DEFAULT_FEATURES
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    /// Total evaluations per run, initial design included.
    pub budget: usize,
    /// Initial design size; `2 (D + 1)` when absent.
    #[serde(default)]
    pub initial: Option<usize>,
    pub replications: usize,
    /// Replication indices; `0..replications` when absent.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    pub methods: Vec<String>,
    pub kernel: KernelSettings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default = "default_features")]
    pub features: usize,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub timing_mode: TimingMode,
    pub out: PathBuf,
}

/// Offset between a replication's test-function seed and its run seed.
pub const RUN_SEED_OFFSET: u64 = 1_000_000;

impl ExperimentConfig {
    /// Reads preset `preset` from a TOML file of named presets.
    pub fn load(path: &Path, preset: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text, preset).with_context(|| format!("in {}", path.display()))
    }

    pub fn from_toml(text: &str, preset: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse()?;
        let Some(section) = table.remove(preset) else {
            let names: Vec<_> = table.keys().cloned().collect();
            bail!("no preset `{preset}` (available: {})", names.join(", "));
        };
        let cfg: Self = section.try_into().with_context(|| format!("preset `{preset}`"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.dims.is_empty() && self.dims.iter().all(|&d| d >= 1), "dims must be nonempty and ≥ 1");
        ensure!(self.replications >= 1, "replications must be at least 1");
        ensure!(!self.methods.is_empty(), "no methods selected");
        ensure!(self.budget >= 1, "budget must be at least 1");
        if let Some(s) = &self.seeds {
            ensure!(!s.is_empty(), "seed list is empty");
        }
        for &d in &self.dims {
            let n0 = self.initial_for(d);
            ensure!(n0 >= 1 && n0 <= self.budget, "initial design {n0} exceeds budget {} for D = {d}", self.budget);
        }
        self.variants()?;
        self.optimizer.outer()?;
        self.optimizer.inner()?;
        self.optimizer.recommend()?;
        ensure!(self.features >= kgrad::testbed::MIN_FEATURES, "need at least {} features", kgrad::testbed::MIN_FEATURES);
        Ok(())
    }

    pub fn initial_for(&self, dim: usize) -> usize {
        self.initial.unwrap_or(2 * (dim + 1))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..self.replications as u64).collect())
    }

    pub fn variants(&self) -> Result<Vec<Variant>> {
        self.methods
            .iter()
            .map(|m| m.parse::<Variant>().map_err(anyhow::Error::from))
            .collect()
    }

    pub fn spec(&self, variant: Variant) -> Result<AcquisitionSpec> {
        Ok(AcquisitionSpec::new(variant)
            .with_outer(self.optimizer.outer()?)
            .with_inner(self.optimizer.inner()?))
    }

    pub fn kernel_for(&self, dim: usize) -> Result<KernelConfig<f64>> {
        let k = &self.kernel;
        Ok(KernelConfig::isotropic_se(dim, k.signal_variance, k.lengthscale, k.noise_variance)?)
    }

    pub fn worker_count(&self) -> usize {
        match self.timing_mode {
            TimingMode::Pinned => 1,
            TimingMode::Parallel if self.jobs == 0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            TimingMode::Parallel => self.jobs,
        }
    }
}

/// Parses `a..b` (half-open) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        ensure!(a < b, "empty seed range {s}");
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`")))
        .collect()
}
