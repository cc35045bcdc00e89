use super::epigraph::{epigraph_expectation, EnvelopeResult};
use super::{Discretization, KgContext};
use crate::error::{ensure, Result};
use crate::gp::Anchor;
use crate::Scalar;

/// Acquisition value with gradients for the candidate and for every free
/// discretization point.
#[derive(Debug, Clone, PartialEq)]
pub struct KgGrad<T> {
    pub value: T,
    pub d_x_new: Vec<T>,
    /// One entry per free point (an appended incumbent is not free).
    pub d_points: Vec<Vec<T>>,
}

pub(crate) struct DiscreteEval<T> {
    pub envelope: EnvelopeResult<T>,
    pub d_x_new: Vec<T>,
    pub d_points: Vec<Vec<T>>,
}

/// Discrete KG over `points` for the anchor's `x_new`. Point gradients are
/// computed for the first `free` points only.
pub(crate) fn discrete_eval<T: Scalar>(
    anchor: &Anchor<'_, T>,
    points: &[Vec<T>],
    free: usize,
) -> Result<DiscreteEval<T>> {
    let gp = anchor.gp();
    let dim = gp.dim();
    ensure(points.iter().all(|p| p.len() == dim), || {
        format!("discretization points must have dimension {dim}")
    })?;
    let mu: Vec<T> = points.iter().map(|p| gp.mean_unchecked(p)).collect();
    let sigma: Vec<T> = points.iter().map(|p| anchor.sigma_tilde(p)).collect();
    let envelope = epigraph_expectation(&mu, &sigma)?;

    let n = points.len();
    let gm = envelope.grad_mu(n);
    let gs = envelope.grad_sigma(n);
    let d_x_new = anchor.backprop_x_new(points, &gs);
    let d_points = points[..free]
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut g = vec![T::zero(); dim];
            if gm[i] != T::zero() {
                gp.mean_grad_acc(p, gm[i], &mut g);
            }
            if gs[i] != T::zero() {
                anchor.sigma_tilde_grad_acc(p, gs[i], &mut g);
            }
            g
        })
        .collect();
    Ok(DiscreteEval {
        envelope,
        d_x_new,
        d_points,
    })
}

/// `E_Z[max_i μ^n(x_i) + σ̃(x_i; x_new) Z] − max_i μ^n(x_i)` over the
/// discretization.
pub fn kg_discrete<T: Scalar>(ctx: &KgContext<'_, T>, x_new: &[T], disc: &Discretization<T>) -> Result<T> {
    let anchor = ctx.gp().anchor(x_new)?;
    let points = disc.resolve(ctx);
    Ok(discrete_eval(&anchor, &points, 0)?.envelope.value)
}

/// [`kg_discrete`] with gradients with respect to `x_new` and every
/// discretization point, holding the envelope's line set fixed.
pub fn kg_discrete_with_grad<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    disc: &Discretization<T>,
) -> Result<KgGrad<T>> {
    let anchor = ctx.gp().anchor(x_new)?;
    let points = disc.resolve(ctx);
    let e = discrete_eval(&anchor, &points, disc.points.len())?;
    Ok(KgGrad {
        value: e.envelope.value,
        d_x_new: e.d_x_new,
        d_points: e.d_points,
    })
}

/// Discrete KG with the incumbent always appended; the discretization is a
/// free variable when this is optimized through [`super::next_point`].
pub fn kg_oneshot_hybrid<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    disc: &Discretization<T>,
) -> Result<T> {
    let disc = Discretization {
        points: disc.points.clone(),
        include_incumbent: true,
    };
    kg_discrete(ctx, x_new, &disc)
}
