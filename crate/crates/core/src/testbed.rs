//! Synthetic objectives drawn from a squared-exponential GP prior, and
//! space-filling initial designs.
//!
//! A draw is realized with random Fourier features,
//! `f(x) = √(2σ²/m) Σ_i w_i cos(ω_i·x + b_i)` with `ω_i ~ N(0, I/l²)`,
//! `b_i ~ U(0, 2π)`, `w_i ~ N(0, 1)`, whose covariance tends to the SE kernel
//! as `m` grows. The function is smooth, cheap, and exactly differentiable.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Result};
use crate::optimizer::{maximize_from, BoxDomain, OptimizerConfig};
use crate::qmc;
use crate::Scalar;

pub const DEFAULT_FEATURES: usize = 1024;
pub const MIN_FEATURES: usize = 256;
pub const AUDIT_POINTS: usize = 10_000;
pub const MIN_OPTIMUM_RESTARTS: usize = 50;

const FEATURE_STREAM: u64 = 11;
const AUDIT_STREAM: u64 = 12;

#[derive(Debug)]
pub struct TestFunction {
    dim: usize,
    lengthscale: f64,
    variance: f64,
    seed: u64,
    /// `m × D`, row-major.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    amplitudes: Vec<f64>,
    scale: f64,
    optimum: OnceLock<(Vec<f64>, f64)>,
}

impl Clone for TestFunction {
    fn clone(&self) -> Self {
        let optimum = OnceLock::new();
        if let Some(o) = self.optimum.get() {
            let _ = optimum.set(o.clone());
        }
        Self {
            dim: self.dim,
            lengthscale: self.lengthscale,
            variance: self.variance,
            seed: self.seed,
            frequencies: self.frequencies.clone(),
            phases: self.phases.clone(),
            amplitudes: self.amplitudes.clone(),
            scale: self.scale,
            optimum,
        }
    }
}

/// Draws a function from the SE-kernel prior with `features` random features.
pub fn sample_gp_function(
    dim: usize,
    lengthscale: f64,
    variance: f64,
    features: usize,
    seed: u64,
) -> Result<TestFunction> {
    ensure(dim >= 1, || "dimension must be at least 1".into())?;
    ensure(features >= MIN_FEATURES, || {
        format!("need at least {MIN_FEATURES} features, got {features}")
    })?;
    ensure(lengthscale > 0.0 && variance > 0.0, || {
        "lengthscale and variance must be positive".into()
    })?;
    let mut r = qmc::rng(qmc::substream(seed, FEATURE_STREAM));
    let mut frequencies = Vec::with_capacity(features * dim);
    let mut phases = Vec::with_capacity(features);
    let mut amplitudes = Vec::with_capacity(features);
    for _ in 0..features {
        for _ in 0..dim {
            let g: f64 = r.sample(StandardNormal);
            frequencies.push(g / lengthscale);
        }
        phases.push(r.random::<f64>() * std::f64::consts::TAU);
        amplitudes.push(r.sample::<f64, _>(StandardNormal));
    }
    Ok(TestFunction {
        dim,
        lengthscale,
        variance,
        seed,
        frequencies,
        phases,
        amplitudes,
        scale: (2.0 * variance / features as f64).sqrt(),
        optimum: OnceLock::new(),
    })
}

impl TestFunction {
    /// SE prior draw with [`DEFAULT_FEATURES`] features.
    pub fn new(dim: usize, lengthscale: f64, variance: f64, seed: u64) -> Result<Self> {
        sample_gp_function(dim, lengthscale, variance, DEFAULT_FEATURES, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn features(&self) -> usize {
        self.phases.len()
    }

    fn phase(&self, i: usize, x: &[f64]) -> f64 {
        let w = &self.frequencies[i * self.dim..(i + 1) * self.dim];
        w.iter().zip(x).fold(self.phases[i], |acc, (a, b)| acc + a * b)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.features()).fold(0.0, |s, i| s + self.amplitudes[i] * self.scale * self.phase(i, x).cos())
    }

    /// Value, with the gradient added into `grad`.
    pub fn eval_grad_acc(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.features() {
            let (sin, cos) = self.phase(i, x).sin_cos();
            let a = self.amplitudes[i] * self.scale;
            s += a * cos;
            let w = &self.frequencies[i * self.dim..(i + 1) * self.dim];
            for (g, wj) in grad.iter_mut().zip(w) {
                *g -= a * sin * wj;
            }
        }
        s
    }

    pub fn eval_with_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.dim];
        let v = self.eval_grad_acc(x, &mut g);
        (v, g)
    }

    /// The seeded audit set used to certify [`true_optimum`].
    pub fn audit_points(&self) -> Vec<Vec<f64>> {
        qmc::unit_points(AUDIT_POINTS, self.dim, qmc::substream(self.seed, AUDIT_STREAM))
    }

    /// Global maximum with the default generous budget, computed once.
    pub fn optimum(&self) -> Result<&(Vec<f64>, f64)> {
        if let Some(o) = self.optimum.get() {
            return Ok(o);
        }
        let cfg = OptimizerConfig::inner()
            .with_restarts(MIN_OPTIMUM_RESTARTS)
            .with_max_iters(200)
            .with_seed(self.seed);
        let o = true_optimum(self, &cfg)?;
        Ok(self.optimum.get_or_init(|| o))
    }

    /// `max f − f(x)` against the cached optimum.
    pub fn opportunity_cost(&self, x: &[f64]) -> Result<f64> {
        Ok(self.optimum()?.1 - self.eval(x))
    }
}

/// Multi-restart maximization with at least [`MIN_OPTIMUM_RESTARTS`] restarts,
/// the best of [`AUDIT_POINTS`] audit points as the first start. The result
/// dominates the audit set by construction.
pub fn true_optimum(f: &TestFunction, cfg: &OptimizerConfig) -> Result<(Vec<f64>, f64)> {
    let audit = f.audit_points();
    let (best_i, best_v) = audit
        .iter()
        .map(|x| f.eval(x))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    let cfg = cfg.clone().with_restarts(cfg.restarts.max(MIN_OPTIMUM_RESTARTS));
    let dom = BoxDomain::unit(f.dim);
    let m = maximize_from(|x, g| f.eval_grad_acc(x, g), &dom, &cfg, vec![audit[best_i].clone()])?;
    let v = f.eval(&m.x);
    if v >= best_v {
        Ok((m.x, v))
    } else {
        Ok((audit[best_i].clone(), best_v))
    }
}

/// `n` points with exactly one point in each of the `n` equal slabs of every
/// coordinate.
pub fn latin_hypercube<T: Scalar>(n: usize, dim: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    ensure(n >= 1 && dim >= 1, || "latin hypercube needs n ≥ 1 and dim ≥ 1".into())?;
    let mut r = qmc::rng(seed);
    let mut pts = vec![vec![T::zero(); dim]; n];
    let mut slots: Vec<usize> = (0..n).collect();
    for j in 0..dim {
        slots.shuffle(&mut r);
        for (p, &s) in pts.iter_mut().zip(&slots) {
            let u: f64 = r.random();
            p[j] = T::lit((s as f64 + u) / n as f64);
        }
    }
    Ok(pts)
}
