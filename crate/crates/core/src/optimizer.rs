//! Deterministic multi-restart gradient ascent on axis-aligned boxes.
//!
//! Each restart runs a projected ascent: gradients are projected onto the
//! feasible cone and iterates are clipped back into the box after every step.
//! Restarts are evaluated serially and the best one wins, ties going to the
//! lowest restart index, so results are bit-reproducible for a given seed.

use std::collections::VecDeque;

use crate::error::{ensure, Error, Result};
use crate::qmc::Halton;
use crate::scalar::{dot, norm_inf};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepRule {
    /// Limited-memory BFGS direction with projected backtracking.
    QuasiNewton,
    /// Projected steepest ascent with an adaptive, backtracked step size.
    FixedStepAscentWithBacktracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tolerance: f64,
    pub step_rule: StepRule,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::inner()
    }
}

impl OptimizerConfig {
    /// Budget for inner fantasy maximizations and incumbent search.
    pub fn inner() -> Self {
        Self {
            restarts: 10,
            max_iters: 100,
            grad_tolerance: 1e-6,
            step_rule: StepRule::QuasiNewton,
            seed: 0,
        }
    }

    /// Budget for optimizing an acquisition surface.
    pub fn acquisition() -> Self {
        Self {
            restarts: 20,
            ..Self::inner()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.restarts >= 1, || "optimizer needs at least one restart".into())?;
        ensure(self.max_iters >= 1, || "optimizer needs at least one iteration".into())?;
        ensure(self.grad_tolerance > 0.0, || {
            format!("gradient tolerance must be positive, got {}", self.grad_tolerance)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> BoxDomain<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        ensure(lower.len() == upper.len() && !lower.is_empty(), || {
            "box bounds must be nonempty and of equal length".into()
        })?;
        ensure(lower.iter().zip(&upper).all(|(l, u)| l < u), || {
            "box lower bound must be below upper bound".into()
        })?;
        Ok(Self { lower, upper })
    }

    /// `[0, 1]^dim`
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![T::zero(); dim],
            upper: vec![T::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&v, &l), &u)| v >= l && v <= u)
    }

    pub fn clip(&self, x: &mut [T]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(l).min(u);
        }
    }

    /// `d` copies of this box side by side.
    pub fn power(&self, copies: usize) -> Self {
        Self {
            lower: self.lower.repeat(copies),
            upper: self.upper.repeat(copies),
        }
    }

    /// Maps a unit-cube point into the box.
    pub fn from_unit(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((&t, &l), &h)| l + t * (h - l))
            .collect()
    }

    fn project_gradient(&self, x: &[T], g: &[T], out: &mut [T]) {
        for i in 0..x.len() {
            let blocked = (x[i] <= self.lower[i] && g[i] < T::zero())
                || (x[i] >= self.upper[i] && g[i] > T::zero());
            out[i] = if blocked { T::zero() } else { g[i] };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Index of the winning restart.
    pub restart: usize,
    /// Restarts that finished with a finite value.
    pub completed: usize,
    /// Ascent steps summed over all restarts.
    pub iterations: usize,
    /// Objective evaluations summed over all restarts.
    pub evaluations: usize,
}

struct Local<T> {
    x: Vec<T>,
    value: T,
    iterations: usize,
    evaluations: usize,
}

/// Maximizes `f` over `dom`. `f(x, grad)` returns the value and writes the
/// gradient into the zeroed `grad`.
///
/// Restart starting points come from a seeded rotated Halton sequence.
pub fn maximize<T, F>(f: F, dom: &BoxDomain<T>, cfg: &OptimizerConfig) -> Result<Maximum<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) -> T,
{
    maximize_from(f, dom, cfg, Vec::new())
}

/// Like [`maximize`], but the first restarts start from `starts`; the
/// remaining `cfg.restarts − starts.len()` come from the seeded sequence.
pub fn maximize_from<T, F>(
    f: F,
    dom: &BoxDomain<T>,
    cfg: &OptimizerConfig,
    mut starts: Vec<Vec<T>>,
) -> Result<Maximum<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) -> T,
{
    cfg.validate()?;
    for s in &starts {
        ensure(s.len() == dom.dim(), || {
            format!("start point has dimension {}, box has {}", s.len(), dom.dim())
        })?;
    }
    if starts.len() < cfg.restarts {
        let mut seq = Halton::new(dom.dim(), cfg.seed);
        while starts.len() < cfg.restarts {
            let u: Vec<T> = seq.next_point();
            starts.push(dom.from_unit(&u));
        }
    }

    let mut best: Option<Maximum<T>> = None;
    let mut completed = 0;
    let mut iterations = 0;
    let mut evaluations = 0;
    for (r, start) in starts.into_iter().enumerate() {
        let Some(local) = ascend(&f, dom, start, cfg) else {
            continue;
        };
        completed += 1;
        iterations += local.iterations;
        evaluations += local.evaluations;
        if best.as_ref().is_none_or(|b| local.value > b.value) {
            best = Some(Maximum {
                x: local.x,
                value: local.value,
                restart: r,
                completed: 0,
                iterations: 0,
                evaluations: 0,
            });
        }
    }
    let mut best = best.ok_or(Error::OptimizerFailed {
        restarts: cfg.restarts,
    })?;
    best.completed = completed;
    best.iterations = iterations;
    best.evaluations = evaluations;
    Ok(best)
}

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn ascend<T, F>(f: &F, dom: &BoxDomain<T>, mut x: Vec<T>, cfg: &OptimizerConfig) -> Option<Local<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) -> T,
{
    let n = x.len();
    dom.clip(&mut x);
    let mut g = vec![T::zero(); n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || !all_finite(&g) {
        return None;
    }

    let tol = T::lit(cfg.grad_tolerance);
    let ftol = T::epsilon() * T::lit(4.0);
    let mut pg = vec![T::zero(); n];
    let mut memory: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(MEMORY);
    let mut step = T::one();
    let mut xn = vec![T::zero(); n];
    let mut gn = vec![T::zero(); n];
    let mut iterations = 0;
    let mut stalls = 0;

    while iterations < cfg.max_iters {
        dom.project_gradient(&x, &g, &mut pg);
        let pg_norm = norm_inf(&pg);
        if pg_norm <= tol {
            break;
        }

        let mut d = match cfg.step_rule {
            StepRule::QuasiNewton if !memory.is_empty() => two_loop(&pg, &memory),
            _ => pg.clone(),
        };
        dom.project_gradient(&x, &d.clone(), &mut d);
        if !(dot(&d, &pg) > T::zero()) || !all_finite(&d) {
            d.copy_from_slice(&pg);
            memory.clear();
        }
        let d_norm = norm_inf(&d);
        let mut t = match cfg.step_rule {
            StepRule::QuasiNewton if !memory.is_empty() => T::one(),
            StepRule::QuasiNewton => (T::lit(0.1) / d_norm).min(T::one()),
            StepRule::FixedStepAscentWithBacktracking => step / d_norm,
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                xn[i] = x[i] + t * d[i];
            }
            dom.clip(&mut xn);
            if xn == x {
                break;
            }
            gn.iter_mut().for_each(|v| *v = T::zero());
            let fnew = f(&xn, &mut gn);
            evaluations += 1;
            if !fnew.is_finite() || !all_finite(&gn) {
                return None;
            }
            let moved: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            if fnew >= fx + T::lit(ARMIJO) * dot(&g, &moved) {
                accepted = Some((fnew, moved));
                break;
            }
            t *= T::lit(0.5);
        }

        let Some((fnew, s)) = accepted else {
            if !memory.is_empty() {
                memory.clear();
                continue;
            }
            break;
        };
        iterations += 1;

        // curvature pair for −f
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| b - a).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s.clone(), y, T::one() / sy));
        }
        if cfg.step_rule == StepRule::FixedStepAscentWithBacktracking {
            step = (t * d_norm * T::lit(2.0)).min(T::one());
        }

        let gain = fnew - fx;
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
        fx = fnew;
        if gain <= ftol * (T::one() + fx.abs()) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    Some(Local {
        x,
        value: fx,
        iterations,
        evaluations,
    })
}

/// L-BFGS two-loop recursion producing an ascent direction for `f` from its
/// (projected) gradient `q`, using curvature pairs of `−f`.
fn two_loop<T: Scalar>(q: &[T], memory: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = q.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let (s, y, _) = memory.back().expect("nonempty memory");
    let gamma = dot(s, y) / dot(y, y);
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}

/// A candidate location together with a discretization, optimized jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint<T> {
    pub x_new: Vec<T>,
    pub points: Vec<Vec<T>>,
}

impl<T: Scalar> JointPoint<T> {
    pub fn flatten(&self) -> Vec<T> {
        let mut v = self.x_new.clone();
        for p in &self.points {
            v.extend_from_slice(p);
        }
        v
    }

    pub fn split(flat: &[T], dim: usize) -> Self {
        let mut chunks = flat.chunks(dim);
        let x_new = chunks.next().map(<[T]>::to_vec).unwrap_or_default();
        Self {
            x_new,
            points: chunks.map(<[T]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointMaximum<T> {
    pub point: JointPoint<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Maximizes `f` over `(x_new, X_d) ∈ dom^{1+d}` by treating the tuple as one
/// flat vector `[x_new, p_1, …, p_d]`. `f` receives and fills flat slices.
pub fn maximize_joint<T, F>(
    f: F,
    dom: &BoxDomain<T>,
    d: usize,
    cfg: &OptimizerConfig,
    init: Option<&JointPoint<T>>,
) -> Result<JointMaximum<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) -> T,
{
    maximize_joint_from(f, dom, d, cfg, init.into_iter().cloned().collect())
}

/// [`maximize_joint`] with an explicit list of starting tuples.
pub fn maximize_joint_from<T, F>(
    f: F,
    dom: &BoxDomain<T>,
    d: usize,
    cfg: &OptimizerConfig,
    starts: Vec<JointPoint<T>>,
) -> Result<JointMaximum<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) -> T,
{
    let dim = dom.dim();
    for s in &starts {
        ensure(s.points.len() == d && s.x_new.len() == dim, || {
            format!("joint start must hold x_new plus {d} points of dimension {dim}")
        })?;
    }
    let joint = dom.power(1 + d);
    let flat_starts = starts.iter().map(JointPoint::flatten).collect();
    let m = maximize_from(f, &joint, cfg, flat_starts)?;
    Ok(JointMaximum {
        point: JointPoint::split(&m.x, dim),
        value: m.value,
        iterations: m.iterations,
        evaluations: m.evaluations,
    })
}
