use super::discrete::{discrete_eval, KgGrad};
use super::{Discretization, KgContext, ZSet};
use crate::error::{ensure, Error, Result};
use crate::gp::Anchor;
use crate::optimizer::{maximize_from, BoxDomain, OptimizerConfig};
use crate::Scalar;

/// Monte-Carlo KG estimate together with the inner solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate<T> {
    pub value: T,
    /// `argmax_x μ^{n+1}_j(x)` per z value.
    pub argmaxes: Vec<Vec<T>>,
    /// `max_x μ^{n+1}_j(x)` per z value.
    pub maxima: Vec<T>,
}

/// Maximizes every fantasy mean. Each inner run starts from the incumbent and
/// from `x_new`, then from the seeded sequence.
fn maximize_fantasies<T: Scalar>(
    ctx: &KgContext<'_, T>,
    anchor: &Anchor<'_, T>,
    zs: &[T],
    opt: &OptimizerConfig,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let gp = ctx.gp();
    let dom = BoxDomain::unit(ctx.dim());
    let mut argmaxes = Vec::with_capacity(zs.len());
    let mut maxima = Vec::with_capacity(zs.len());
    for &z in zs {
        let f = |x: &[T], g: &mut [T]| gp.mean_grad_acc(x, T::one(), g) + anchor.sigma_tilde_grad_acc(x, z, g) * z;
        let starts = vec![ctx.incumbent().to_vec(), anchor.x_new().to_vec()];
        let m = maximize_from(f, &dom, opt, starts).map_err(|e| Error::Inner {
            z: z.as_f64(),
            source: Box::new(e),
        })?;
        argmaxes.push(m.x);
        maxima.push(m.value);
    }
    Ok((argmaxes, maxima))
}

fn mc_estimate<T: Scalar>(
    ctx: &KgContext<'_, T>,
    anchor: &Anchor<'_, T>,
    zs: &ZSet<T>,
    opt: &OptimizerConfig,
) -> Result<McEstimate<T>> {
    let (argmaxes, maxima) = maximize_fantasies(ctx, anchor, &zs.values, opt)?;
    let n = T::lit(maxima.len() as f64);
    let value = maxima.iter().copied().sum::<T>() / n - ctx.incumbent_value();
    Ok(McEstimate {
        value,
        argmaxes,
        maxima,
    })
}

/// `(1/n_z) Σ_j max_x μ^{n+1}_j(x) − max_x μ^n(x)`, each inner maximum found
/// numerically.
pub fn kg_mc<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    zs: &ZSet<T>,
    opt: &OptimizerConfig,
) -> Result<McEstimate<T>> {
    let anchor = ctx.gp().anchor(x_new)?;
    mc_estimate(ctx, &anchor, zs, opt)
}

/// [`kg_mc`] and its gradient in `x_new`. The inner maximizers are held fixed
/// (envelope theorem), so the gradient is `(1/n_z) Σ_j z_j ∇σ̃(x*_j; x_new)`.
pub fn kg_mc_with_grad<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    zs: &ZSet<T>,
    opt: &OptimizerConfig,
) -> Result<(McEstimate<T>, Vec<T>)> {
    let anchor = ctx.gp().anchor(x_new)?;
    let est = mc_estimate(ctx, &anchor, zs, opt)?;
    let n = T::lit(zs.len() as f64);
    let upstream: Vec<T> = zs.values.iter().map(|&z| z / n).collect();
    let grad = anchor.backprop_x_new(&est.argmaxes, &upstream);
    Ok((est, grad))
}

fn hybrid_points<T: Scalar>(
    ctx: &KgContext<'_, T>,
    anchor: &Anchor<'_, T>,
    n_z: usize,
    opt: &OptimizerConfig,
) -> Result<Discretization<T>> {
    let zs = ZSet::quantiles(n_z)?;
    let (argmaxes, _) = maximize_fantasies(ctx, anchor, &zs.values, opt)?;
    Discretization::new(argmaxes, true)
}

/// Discrete KG over the maximizers of `n_z` quantile fantasies plus the
/// incumbent. Returns the discretization that was used.
pub fn kg_hybrid<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    n_z: usize,
    opt: &OptimizerConfig,
) -> Result<(T, Discretization<T>)> {
    let anchor = ctx.gp().anchor(x_new)?;
    let disc = hybrid_points(ctx, &anchor, n_z, opt)?;
    let e = discrete_eval(&anchor, &disc.resolve(ctx), 0)?;
    Ok((e.envelope.value, disc))
}

/// [`kg_hybrid`] with the gradient in `x_new`, holding the inner maximizers
/// fixed. `d_points` is empty.
pub fn kg_hybrid_with_grad<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    n_z: usize,
    opt: &OptimizerConfig,
) -> Result<(KgGrad<T>, Discretization<T>)> {
    let anchor = ctx.gp().anchor(x_new)?;
    let disc = hybrid_points(ctx, &anchor, n_z, opt)?;
    let e = discrete_eval(&anchor, &disc.resolve(ctx), 0)?;
    let g = KgGrad {
        value: e.envelope.value,
        d_x_new: e.d_x_new,
        d_points: Vec::new(),
    };
    Ok((g, disc))
}

fn oneshot_eval<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    disc: &Discretization<T>,
    zs: &ZSet<T>,
    with_grad: bool,
) -> Result<KgGrad<T>> {
    ensure(disc.points.len() == zs.len(), || {
        format!("one-shot pairs {} points with {} z values", disc.points.len(), zs.len())
    })?;
    let gp = ctx.gp();
    let dim = gp.dim();
    ensure(disc.points.iter().all(|p| p.len() == dim), || {
        format!("discretization points must have dimension {dim}")
    })?;
    // a noise-free repeat of a data point has σ̃ ≡ 0: only the means remain
    let anchor = match gp.anchor(x_new) {
        Ok(a) => Some(a),
        Err(Error::DegenerateAnchor { .. }) => None,
        Err(e) => return Err(e),
    };
    let n = T::lit(zs.len() as f64);
    let mut total = T::zero();
    let mut d_points = Vec::new();
    for (p, &z) in disc.points.iter().zip(&zs.values) {
        if with_grad {
            let mut g = vec![T::zero(); dim];
            total += gp.mean_grad_acc(p, T::one() / n, &mut g);
            if let Some(a) = &anchor {
                total += a.sigma_tilde_grad_acc(p, z / n, &mut g) * z;
            }
            d_points.push(g);
        } else {
            total += gp.mean_unchecked(p);
            if let Some(a) = &anchor {
                total += a.sigma_tilde(p) * z;
            }
        }
    }
    let d_x_new = match (&anchor, with_grad) {
        (Some(a), true) => {
            let upstream: Vec<T> = zs.values.iter().map(|&z| z / n).collect();
            a.backprop_x_new(&disc.points, &upstream)
        }
        (None, true) => vec![T::zero(); dim],
        (_, false) => Vec::new(),
    };
    Ok(KgGrad {
        value: total / n - ctx.incumbent_value(),
        d_x_new,
        d_points,
    })
}

/// `(1/n_z) Σ_j μ^{n+1}_j(x_j) − max_x μ^n(x)` with each point `x_j` paired
/// with `z_j`. Without optimizing the points this underestimates [`kg_mc`].
pub fn kg_oneshot<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    disc: &Discretization<T>,
    zs: &ZSet<T>,
) -> Result<T> {
    Ok(oneshot_eval(ctx, x_new, disc, zs, false)?.value)
}

/// [`kg_oneshot`] with gradients in `x_new` and every paired point.
pub fn kg_oneshot_with_grad<T: Scalar>(
    ctx: &KgContext<'_, T>,
    x_new: &[T],
    disc: &Discretization<T>,
    zs: &ZSet<T>,
) -> Result<KgGrad<T>> {
    oneshot_eval(ctx, x_new, disc, zs, true)
}
