use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;

use super::discrete::discrete_eval;
use super::montecarlo::{kg_hybrid_with_grad, kg_mc_with_grad, kg_oneshot_with_grad};
use super::{Discretization, KgContext, ZSet};
use crate::error::{ensure, Error, Result};
use crate::optimizer::{maximize_from, maximize_joint_from, BoxDomain, JointPoint, OptimizerConfig};
use crate::qmc;
use crate::Scalar;

const DISC_STREAM: u64 = 1;
const Z_STREAM: u64 = 2;
const INNER_STREAM: u64 = 3;
const JOINT_STREAM: u64 = 4;
const RANDOM_STREAM: u64 = 5;

/// Which acquisition function to optimize, with its size parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Discrete KG on `d` fixed space-filling points plus the incumbent.
    Disc(usize),
    /// Monte-Carlo KG with `n_z` frozen quasi-random z values.
    Mc(usize),
    /// Hybrid KG with `n_z` quantile fantasies.
    Hybrid(usize),
    /// One-shot KG with `n_z` z values and as many free inner points.
    OneShot(usize),
    /// Discrete KG over `d` free points plus the incumbent, optimized jointly.
    OneShotHybrid(usize),
    /// Uniform random sampling.
    Random,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Disc(_) => "disc",
            Variant::Mc(_) => "mc",
            Variant::Hybrid(_) => "hybrid",
            Variant::OneShot(_) => "oneshot",
            Variant::OneShotHybrid(_) => "osh",
            Variant::Random => "random",
        }
    }

    pub fn size(&self) -> Option<usize> {
        match *self {
            Variant::Disc(n)
            | Variant::Mc(n)
            | Variant::Hybrid(n)
            | Variant::OneShot(n)
            | Variant::OneShotHybrid(n) => Some(n),
            Variant::Random => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.size() {
            Some(n) => write!(f, "{}:{n}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Parses `name:size` (e.g. `osh:10`) or `random`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "random" {
            return Ok(Variant::Random);
        }
        let bad = || Error::Contract(format!("unknown method `{s}` (expected e.g. disc:3, osh:10, random)"));
        let (name, size) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = size.parse().map_err(|_| bad())?;
        ensure(n >= 1, || format!("method `{s}` needs a size of at least 1"))?;
        match name {
            "disc" => Ok(Variant::Disc(n)),
            "mc" => Ok(Variant::Mc(n)),
            "hybrid" => Ok(Variant::Hybrid(n)),
            "oneshot" | "os" => Ok(Variant::OneShot(n)),
            "osh" | "oneshot-hybrid" | "oneshothybrid" => Ok(Variant::OneShotHybrid(n)),
            _ => Err(bad()),
        }
    }
}

/// A variant together with the budgets of the outer (acquisition) and inner
/// (fantasy) optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    pub variant: Variant,
    pub outer: OptimizerConfig,
    pub inner: OptimizerConfig,
}

impl AcquisitionSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            outer: OptimizerConfig::acquisition(),
            inner: OptimizerConfig::inner(),
        }
    }

    pub fn with_outer(mut self, outer: OptimizerConfig) -> Self {
        self.outer = outer;
        self
    }

    pub fn with_inner(mut self, inner: OptimizerConfig) -> Self {
        self.inner = inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.variant.size() {
            ensure(n >= 1, || format!("{} needs a size of at least 1", self.variant.name()))?;
        }
        self.outer.validate()?;
        self.inner.validate()
    }
}

/// The point chosen by [`next_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal<T> {
    pub x: Vec<T>,
    /// Acquisition value at `x` (zero for random sampling, NaN on fallback).
    pub value: T,
    /// Monotonic-clock time spent choosing `x`.
    pub wall_time: Duration,
    pub iterations: usize,
    pub evaluations: usize,
    /// Every restart failed and `x` is a random point instead.
    pub fallback: bool,
}

/// Starting tuples for joint optimization: per restart, `x_new` is a
/// quasi-random point and the `d` inner points are `spread` space-filling
/// points with copies of the incumbent filling the rest.
pub fn oneshot_starts<T: Scalar>(
    ctx: &KgContext<'_, T>,
    d: usize,
    spread: usize,
    restarts: usize,
    seed: u64,
) -> Vec<JointPoint<T>> {
    let dim = ctx.dim();
    let spread = spread.min(d);
    let mut seq = qmc::Halton::new(dim, qmc::substream(seed, JOINT_STREAM));
    (0..restarts)
        .map(|r| {
            let x_new = seq.next_point();
            let mut points = vec![ctx.incumbent().to_vec(); d - spread];
            points.extend(qmc::unit_points(spread, dim, qmc::substream(seed, JOINT_STREAM + 1 + r as u64)));
            JointPoint { x_new, points }
        })
        .collect()
}

/// Degenerate anchors (a noise-free repeat of a data point) gain nothing;
/// any other failure discards the optimizer's restart.
fn guarded<T: Scalar>(r: Result<(T, Vec<T>)>, grad: &mut [T]) -> T {
    match r {
        Ok((v, g)) => {
            grad.copy_from_slice(&g);
            v
        }
        Err(Error::DegenerateAnchor { .. }) => T::zero(),
        Err(_) => T::nan(),
    }
}

fn write_joint<T: Scalar>(grad: &mut [T], d_x_new: &[T], d_points: &[Vec<T>]) {
    let dim = d_x_new.len();
    grad[..dim].copy_from_slice(d_x_new);
    for (chunk, g) in grad[dim..].chunks_mut(dim).zip(d_points) {
        chunk.copy_from_slice(g);
    }
}

/// Chooses the next sample location by maximizing the acquisition function
/// described by `spec`. The result is deterministic in `(ctx, spec, seed)`.
pub fn next_point<T: Scalar>(ctx: &KgContext<'_, T>, spec: &AcquisitionSpec, seed: u64) -> Result<Proposal<T>> {
    spec.validate()?;
    let clock = Instant::now();
    let dim = ctx.dim();
    let dom = BoxDomain::unit(dim);
    let outer = spec.outer.clone().with_seed(seed);
    let inner = spec.inner.clone().with_seed(qmc::substream(seed, INNER_STREAM));
    let single_start = vec![ctx.incumbent().to_vec()];

    let found: Result<(Vec<T>, T, usize, usize)> = match spec.variant {
        Variant::Random => {
            let mut r = qmc::rng(qmc::substream(seed, RANDOM_STREAM));
            let x = (0..dim).map(|_| T::lit(r.random::<f64>())).collect();
            return Ok(Proposal {
                x,
                value: T::zero(),
                wall_time: clock.elapsed(),
                iterations: 0,
                evaluations: 0,
                fallback: false,
            });
        }
        Variant::Disc(d) => {
            let disc = Discretization::space_filling(d, dim, qmc::substream(seed, DISC_STREAM), true)?;
            let points = disc.resolve(ctx);
            let f = |x: &[T], g: &mut [T]| {
                let r = ctx
                    .gp()
                    .anchor(x)
                    .and_then(|a| discrete_eval(&a, &points, 0))
                    .map(|e| (e.envelope.value, e.d_x_new));
                guarded(r, g)
            };
            maximize_from(f, &dom, &outer, single_start).map(|m| (m.x, m.value, m.iterations, m.evaluations))
        }
        Variant::Mc(n) => {
            let zs = ZSet::monte_carlo(n, qmc::substream(seed, Z_STREAM))?;
            let f = |x: &[T], g: &mut [T]| guarded(kg_mc_with_grad(ctx, x, &zs, &inner).map(|(e, d)| (e.value, d)), g);
            maximize_from(f, &dom, &outer, single_start).map(|m| (m.x, m.value, m.iterations, m.evaluations))
        }
        Variant::Hybrid(n) => {
            let f = |x: &[T], g: &mut [T]| {
                guarded(kg_hybrid_with_grad(ctx, x, n, &inner).map(|(k, _)| (k.value, k.d_x_new)), g)
            };
            maximize_from(f, &dom, &outer, single_start).map(|m| (m.x, m.value, m.iterations, m.evaluations))
        }
        Variant::OneShot(n) => {
            let zs = ZSet::monte_carlo(n, qmc::substream(seed, Z_STREAM))?;
            let f = |flat: &[T], g: &mut [T]| {
                let jp = JointPoint::split(flat, dim);
                let disc = Discretization {
                    points: jp.points,
                    include_incumbent: false,
                };
                match kg_oneshot_with_grad(ctx, &jp.x_new, &disc, &zs) {
                    Ok(k) => {
                        write_joint(g, &k.d_x_new, &k.d_points);
                        k.value
                    }
                    Err(e) => guarded(Err(e), g),
                }
            };
            // each paired point starts where the inner MC ascent would
            let starts = oneshot_starts(ctx, n, 0, outer.restarts, seed);
            maximize_joint_from(f, &dom, n, &outer, starts)
                .map(|m| (m.point.x_new, m.value, m.iterations, m.evaluations))
        }
        Variant::OneShotHybrid(d) => {
            let f = |flat: &[T], g: &mut [T]| {
                let jp = JointPoint::split(flat, dim);
                let anchor = match ctx.gp().anchor(&jp.x_new) {
                    Ok(a) => a,
                    Err(e) => return guarded(Err(e), g),
                };
                let free = jp.points.len();
                let mut points = jp.points;
                points.push(ctx.incumbent().to_vec());
                match discrete_eval(&anchor, &points, free) {
                    Ok(e) => {
                        write_joint(g, &e.d_x_new, &e.d_points);
                        e.envelope.value
                    }
                    Err(e) => guarded(Err(e), g),
                }
            };
            let starts = oneshot_starts(ctx, d, d - 1, outer.restarts, seed);
            maximize_joint_from(f, &dom, d, &outer, starts)
                .map(|m| (m.point.x_new, m.value, m.iterations, m.evaluations))
        }
    };

    let proposal = match found {
        Ok((x, value, iterations, evaluations)) => Proposal {
            x,
            value,
            wall_time: clock.elapsed(),
            iterations,
            evaluations,
            fallback: false,
        },
        Err(Error::OptimizerFailed { .. }) => {
            let mut r = qmc::rng(qmc::substream(seed, RANDOM_STREAM));
            Proposal {
                x: (0..dim).map(|_| T::lit(r.random::<f64>())).collect(),
                value: T::nan(),
                wall_time: clock.elapsed(),
                iterations: 0,
                evaluations: 0,
                fallback: true,
            }
        }
        Err(e) => return Err(e),
    };
    Ok(proposal)
}
