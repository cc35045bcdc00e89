//! Knowledge-gradient acquisition functions.
//!
//! Every variant approximates the expected increase in the peak of the
//! posterior mean after one more observation at `x_new`:
//!
//! * [`kg_discrete`]: inner maximum restricted to a finite point set, with the
//!   expectation over `Z` computed exactly by [`epigraph_expectation`];
//! * [`kg_mc`]: inner maximum by numerical optimization, expectation by
//!   averaging over a frozen set of `Z` samples;
//! * [`kg_hybrid`]: the maximizers of a few quantile fantasies become the
//!   discretization of [`kg_discrete`];
//! * [`kg_oneshot`]: `Z` samples paired with free inner points, all optimized
//!   jointly with `x_new`;
//! * [`kg_oneshot_hybrid`]: [`kg_discrete`] whose discretization is optimized
//!   jointly with `x_new`.
//!
//! [`next_point`] optimizes any of them (or samples at random) and reports the
//! wall time spent.

mod discrete;
mod epigraph;
mod montecarlo;
mod select;

pub use discrete::{kg_discrete, kg_discrete_with_grad, kg_oneshot_hybrid, KgGrad};
pub use epigraph::{epigraph_expectation, EnvelopeResult, SLOPE_TIE};
pub use montecarlo::{
    kg_hybrid, kg_hybrid_with_grad, kg_mc, kg_mc_with_grad, kg_oneshot, kg_oneshot_with_grad,
    McEstimate,
};
pub use select::{next_point, oneshot_starts, AcquisitionSpec, Proposal, Variant};

use crate::error::{ensure, Result};
use crate::gp::PosteriorGp;
use crate::normal;
use crate::optimizer::{maximize_from, BoxDomain, OptimizerConfig};
use crate::qmc;
use crate::Scalar;

/// A fitted GP together with its incumbent `x*_n = argmax μ^n`, shared by all
/// acquisition evaluations of one BO iteration.
#[derive(Debug, Clone)]
pub struct KgContext<'a, T> {
    gp: &'a PosteriorGp<T>,
    incumbent: Vec<T>,
    incumbent_value: T,
}

impl<'a, T: Scalar> KgContext<'a, T> {
    /// Finds the incumbent by multi-restart ascent on the posterior mean.
    pub fn new(gp: &'a PosteriorGp<T>, cfg: &OptimizerConfig) -> Result<Self> {
        let (incumbent, incumbent_value) = find_incumbent(gp, cfg)?;
        Ok(Self {
            gp,
            incumbent,
            incumbent_value,
        })
    }

    /// Uses a caller-supplied incumbent, e.g. one cached from a previous call.
    pub fn with_incumbent(gp: &'a PosteriorGp<T>, incumbent: Vec<T>) -> Result<Self> {
        let incumbent_value = gp.mean(&incumbent)?;
        Ok(Self {
            gp,
            incumbent,
            incumbent_value,
        })
    }

    pub fn gp(&self) -> &'a PosteriorGp<T> {
        self.gp
    }

    pub fn incumbent(&self) -> &[T] {
        &self.incumbent
    }

    /// `max_x μ^n(x)` as found by the optimizer.
    pub fn incumbent_value(&self) -> T {
        self.incumbent_value
    }

    pub fn dim(&self) -> usize {
        self.gp.dim()
    }
}

/// Multi-restart maximization of the posterior mean. The best observed input
/// is the first start; exact ties are broken by the lexicographically lowest
/// point.
pub fn find_incumbent<T: Scalar>(gp: &PosteriorGp<T>, cfg: &OptimizerConfig) -> Result<(Vec<T>, T)> {
    let dom = BoxDomain::unit(gp.dim());
    let inputs = gp.data().inputs();
    let means = inputs.iter().map(|x| gp.mean(x)).collect::<Result<Vec<T>>>()?;
    let best_seen = (0..means.len()).fold(0, |b, i| if means[i] > means[b] { i } else { b });
    let f = |x: &[T], g: &mut [T]| gp.mean_grad_acc(x, T::one(), g);

    let mut best: Option<(Vec<T>, T)> = None;
    // Run restarts one at a time so exact ties can be broken lexicographically.
    let mut seq = qmc::Halton::new(gp.dim(), cfg.seed);
    let single = cfg.clone().with_restarts(1);
    for r in 0..cfg.restarts {
        let start = if r == 0 {
            inputs[best_seen].clone()
        } else {
            seq.next_point()
        };
        let Ok(m) = maximize_from(f, &dom, &single, vec![start]) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((bx, bv)) => {
                m.value > *bv || (m.value == *bv && lex_less(&m.x, bx))
            }
        };
        if better {
            best = Some((m.x, m.value));
        }
    }
    best.ok_or(crate::Error::OptimizerFailed {
        restarts: cfg.restarts,
    })
}

fn lex_less<T: Scalar>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Finite set of points standing in for the domain in the inner maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization<T> {
    pub points: Vec<Vec<T>>,
    /// Append the incumbent before evaluating, which makes KG nonnegative.
    pub include_incumbent: bool,
}

impl<T: Scalar> Discretization<T> {
    pub fn new(points: Vec<Vec<T>>, include_incumbent: bool) -> Result<Self> {
        ensure(!points.is_empty(), || "discretization needs at least one point".into())?;
        let dim = points[0].len();
        let dom = BoxDomain::<T>::unit(dim);
        ensure(points.iter().all(|p| dom.contains(p)), || {
            "discretization points must lie in the unit box".into()
        })?;
        Ok(Self {
            points,
            include_incumbent,
        })
    }

    /// `d` space-filling points from the seeded quasi-random sequence.
    pub fn space_filling(d: usize, dim: usize, seed: u64, include_incumbent: bool) -> Result<Self> {
        Self::new(qmc::unit_points(d, dim, seed), include_incumbent)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The points actually evaluated: `points`, plus the incumbent if flagged.
    pub fn resolve(&self, ctx: &KgContext<'_, T>) -> Vec<Vec<T>> {
        let mut pts = self.points.clone();
        if self.include_incumbent {
            pts.push(ctx.incumbent().to_vec());
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZSource {
    MonteCarlo { seed: u64 },
    Quantile,
}

/// Standard-normal scores for the fantasy posterior means.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSet<T> {
    pub values: Vec<T>,
    pub source: ZSource,
}

impl<T: Scalar> ZSet<T> {
    /// `Φ⁻¹((2i − 1) / (2 n))`, `i = 1..n`: evenly spaced normal quantiles.
    pub fn quantiles(n: usize) -> Result<Self> {
        ensure(n >= 1, || "need at least one z value".into())?;
        let values = (1..=n)
            .map(|i| normal::inv_cdf(T::lit((2 * i - 1) as f64 / (2 * n) as f64)))
            .collect();
        Ok(Self {
            values,
            source: ZSource::Quantile,
        })
    }

    /// Quasi-random normal scores, reproducible from `(seed, n)`.
    pub fn monte_carlo(n: usize, seed: u64) -> Result<Self> {
        ensure(n >= 1, || "need at least one z value".into())?;
        Ok(Self {
            values: qmc::gaussian_stream(n, seed),
            source: ZSource::MonteCarlo { seed },
        })
    }

    /// Arbitrary fixed scores, tagged as Monte-Carlo draws from `seed`.
    pub fn from_values(values: Vec<T>, seed: u64) -> Result<Self> {
        ensure(!values.is_empty(), || "need at least one z value".into())?;
        ensure(values.iter().all(|z| z.is_finite()), || "non-finite z value".into())?;
        Ok(Self {
            values,
            source: ZSource::MonteCarlo { seed },
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
