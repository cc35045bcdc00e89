use super::kernel::KernelConfig;
use super::linalg::{cholesky_in_place, solve_lower, solve_upper_t};
use crate::error::{ensure, Error, Result};
use crate::scalar::dot;
use crate::Scalar;

/// Diagonal jitter ladder tried (after the configured jitter) until the
/// Gram matrix factorizes.
pub const JITTER_LEVELS: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Predictive variances at or below this are treated as zero.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Observed inputs in the unit box with their outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    inputs: Vec<Vec<T>>,
    outputs: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: Vec<Vec<T>>, outputs: Vec<T>) -> Result<Self> {
        ensure(!inputs.is_empty(), || "dataset is empty".into())?;
        ensure(inputs.len() == outputs.len(), || {
            format!("{} inputs but {} outputs", inputs.len(), outputs.len())
        })?;
        let dim = inputs[0].len();
        ensure(dim > 0, || "zero-dimensional inputs".into())?;
        for x in &inputs {
            check_point(x, dim)?;
        }
        ensure(outputs.iter().all(|y| y.is_finite()), || "non-finite output".into())?;
        Ok(Self { inputs, outputs })
    }

    pub fn push(&mut self, x: Vec<T>, y: T) -> Result<()> {
        check_point(&x, self.dim())?;
        ensure(y.is_finite(), || "non-finite output".into())?;
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[T] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn mean_output(&self) -> T {
        self.outputs.iter().copied().sum::<T>() / T::lit(self.len() as f64)
    }
}

fn check_point<T: Scalar>(x: &[T], dim: usize) -> Result<()> {
    ensure(x.len() == dim, || format!("point has dimension {}, expected {dim}", x.len()))?;
    ensure(
        x.iter().all(|&v| v >= T::zero() && v <= T::one()),
        || format!("point {x:?} outside the unit box"),
    )
}

/// Gaussian process conditioned on a dataset, with a constant prior mean.
///
/// Immutable once fitted; holds the Cholesky factor of
/// `k(X, X) + (σ_ε² + jitter) I` and the weights `K⁻¹ (Y − μ0)`.
#[derive(Debug, Clone)]
pub struct PosteriorGp<T> {
    data: Dataset<T>,
    kernel: KernelConfig<T>,
    prior_mean: T,
    chol: Vec<T>,
    weights: Vec<T>,
    jitter: T,
}

impl<T: Scalar> PosteriorGp<T> {
    /// Fits the posterior. The configured jitter is tried first, then every
    /// level of [`JITTER_LEVELS`] above it.
    pub fn fit(data: Dataset<T>, kernel: KernelConfig<T>, prior_mean: T) -> Result<Self> {
        kernel.validate()?;
        ensure(kernel.dim() == data.dim(), || {
            format!("kernel dimension {} != data dimension {}", kernel.dim(), data.dim())
        })?;
        ensure(prior_mean.is_finite(), || "non-finite prior mean".into())?;

        let n = data.len();
        let gram = kernel.gram(data.inputs());
        let mut ladder = vec![kernel.jitter];
        ladder.extend(JITTER_LEVELS.iter().map(|&j| T::lit(j)).filter(|&j| j > kernel.jitter));

        for &jitter in &ladder {
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] += kernel.noise_variance + jitter;
            }
            if cholesky_in_place(&mut a, n) {
                let centered: Vec<T> = data.outputs().iter().map(|&y| y - prior_mean).collect();
                let weights = solve_upper_t(&a, n, &solve_lower(&a, n, &centered));
                return Ok(Self {
                    data,
                    kernel,
                    prior_mean,
                    chol: a,
                    weights,
                    jitter,
                });
            }
        }
        Err(Error::NotPositiveDefinite {
            jitters: ladder.iter().map(|j| j.as_f64()).collect(),
        })
    }

    /// Fits with the prior mean set to the mean of the observed outputs.
    pub fn fit_with_output_mean(data: Dataset<T>, kernel: KernelConfig<T>) -> Result<Self> {
        let m = data.mean_output();
        Self::fit(data, kernel, m)
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn kernel(&self) -> &KernelConfig<T> {
        &self.kernel
    }

    pub fn prior_mean(&self) -> T {
        self.prior_mean
    }

    /// Jitter that made the factorization succeed.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Noise variance plus jitter: the diagonal actually added to the Gram.
    pub fn effective_noise(&self) -> T {
        self.kernel.noise_variance + self.jitter
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    fn check(&self, x: &[T]) -> Result<()> {
        self.kernel.check_dim(x)
    }

    pub(crate) fn cross_cov(&self, x: &[T]) -> Vec<T> {
        self.data.inputs().iter().map(|xi| self.kernel.k(x, xi)).collect()
    }

    /// `L⁻¹ k(X, x)`
    pub(crate) fn whiten(&self, kx: &[T]) -> Vec<T> {
        solve_lower(&self.chol, self.len(), kx)
    }

    /// `K⁻¹ v`
    pub(crate) fn solve(&self, v: &[T]) -> Vec<T> {
        let n = self.len();
        solve_upper_t(&self.chol, n, &solve_lower(&self.chol, n, v))
    }

    #[inline]
    pub(crate) fn mean_unchecked(&self, x: &[T]) -> T {
        let s = self
            .data
            .inputs()
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (xi, &w)| acc + w * self.kernel.k(x, xi));
        self.prior_mean + s
    }

    /// Posterior mean; adds `scale · ∇μ(x)` into `grad`.
    #[inline]
    pub(crate) fn mean_grad_acc(&self, x: &[T], scale: T, grad: &mut [T]) -> T {
        let mut s = T::zero();
        for (xi, &w) in self.data.inputs().iter().zip(&self.weights) {
            s += w * self.kernel.k_grad_acc(x, xi, scale * w, grad);
        }
        self.prior_mean + s
    }

    pub fn mean(&self, x: &[T]) -> Result<T> {
        self.check(x)?;
        Ok(self.mean_unchecked(x))
    }

    /// Posterior mean and its gradient with respect to `x`.
    pub fn mean_with_grad(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        self.check(x)?;
        let mut g = vec![T::zero(); x.len()];
        let m = self.mean_grad_acc(x, T::one(), &mut g);
        Ok((m, g))
    }

    /// Posterior covariance `k^n(x, x2)`. The diagonal is clamped at zero.
    pub fn cov(&self, x: &[T], x2: &[T]) -> Result<T> {
        self.check(x)?;
        self.check(x2)?;
        let a = self.whiten(&self.cross_cov(x));
        if x == x2 {
            return Ok(self.clamp_variance(self.kernel.k(x, x) - dot(&a, &a)));
        }
        let b = self.whiten(&self.cross_cov(x2));
        Ok(self.kernel.k(x, x2) - dot(&a, &b))
    }

    fn clamp_variance(&self, v: T) -> T {
        v.max(T::zero())
    }

    pub fn variance(&self, x: &[T]) -> Result<T> {
        self.cov(x, x)
    }

    /// Posterior variance and its gradient; the gradient is zero where the
    /// variance was clamped.
    pub fn variance_with_grad(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        self.check(x)?;
        let kx = self.cross_cov(x);
        let a = self.whiten(&kx);
        let raw = self.kernel.k(x, x) - dot(&a, &a);
        let mut g = vec![T::zero(); x.len()];
        if raw <= T::zero() {
            return Ok((T::zero(), g));
        }
        let alpha = solve_upper_t(&self.chol, self.len(), &a);
        let two = T::lit(2.0);
        for (xi, &am) in self.data.inputs().iter().zip(&alpha) {
            self.kernel.k_grad_acc(x, xi, -two * am, &mut g);
        }
        Ok((raw, g))
    }

    /// Precomputes everything about a candidate observation location that
    /// `σ̃(·; x_new)` needs.
    pub fn anchor(&self, x_new: &[T]) -> Result<Anchor<'_, T>> {
        self.check(x_new)?;
        let kx = self.cross_cov(x_new);
        let a = self.whiten(&kx);
        let raw = self.kernel.k(x_new, x_new) - dot(&a, &a);
        let variance = self.clamp_variance(raw);
        let predictive = variance + self.kernel.noise_variance;
        if predictive <= T::lit(VARIANCE_FLOOR) {
            return Err(Error::DegenerateAnchor {
                variance: predictive.as_f64(),
            });
        }
        let alpha = solve_upper_t(&self.chol, self.len(), &a);
        let scale2 = variance + self.effective_noise();
        Ok(Anchor {
            gp: self,
            x_new: x_new.to_vec(),
            alpha,
            clamped: raw <= T::zero(),
            scale: scale2.sqrt(),
        })
    }

    /// `σ̃(x; x_new) = k^n(x, x_new) / √(k^n(x_new, x_new) + σ_ε²)`.
    pub fn sigma_tilde(&self, x: &[T], x_new: &[T]) -> Result<T> {
        self.check(x)?;
        Ok(self.anchor(x_new)?.sigma_tilde(x))
    }

    /// `σ̃` with its gradients with respect to `x` and `x_new`.
    pub fn sigma_tilde_with_grad(&self, x: &[T], x_new: &[T]) -> Result<SigmaTildeGrad<T>> {
        self.check(x)?;
        let anchor = self.anchor(x_new)?;
        let mut d_x = vec![T::zero(); x.len()];
        let value = anchor.sigma_tilde_grad_acc(x, T::one(), &mut d_x);
        let d_x_new = anchor.backprop_x_new(std::slice::from_ref(&x.to_vec()), &[T::one()]);
        Ok(SigmaTildeGrad { value, d_x, d_x_new })
    }

    /// One-step-ahead posterior mean for a standardized outcome `z` at `x_new`.
    pub fn fantasy(&self, x_new: &[T], z: T) -> Result<FantasySample<'_, T>> {
        Ok(FantasySample {
            anchor: self.anchor(x_new)?,
            z,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaTildeGrad<T> {
    pub value: T,
    pub d_x: Vec<T>,
    pub d_x_new: Vec<T>,
}

/// A fitted GP together with a fixed candidate location `x_new`.
#[derive(Debug, Clone)]
pub struct Anchor<'a, T> {
    gp: &'a PosteriorGp<T>,
    x_new: Vec<T>,
    /// `K⁻¹ k(X, x_new)`
    alpha: Vec<T>,
    clamped: bool,
    /// `√(k^n(x_new, x_new) + σ_ε² + jitter)`
    scale: T,
}

impl<'a, T: Scalar> Anchor<'a, T> {
    pub fn gp(&self) -> &'a PosteriorGp<T> {
        self.gp
    }

    pub fn x_new(&self) -> &[T] {
        &self.x_new
    }

    /// Predictive standard deviation of the outcome at `x_new`.
    pub fn predictive_sd(&self) -> T {
        self.scale
    }

    /// `k^n(x, x_new)` without dimension checks.
    #[inline]
    fn post_cov(&self, x: &[T]) -> T {
        let kern = &self.gp.kernel;
        let s = self
            .gp
            .data
            .inputs()
            .iter()
            .zip(&self.alpha)
            .fold(T::zero(), |acc, (xi, &a)| acc + a * kern.k(x, xi));
        kern.k(x, &self.x_new) - s
    }

    #[inline]
    pub fn sigma_tilde(&self, x: &[T]) -> T {
        self.post_cov(x) / self.scale
    }

    /// `σ̃(x)`; adds `scale · ∂σ̃/∂x` into `grad`.
    #[inline]
    pub fn sigma_tilde_grad_acc(&self, x: &[T], scale: T, grad: &mut [T]) -> T {
        let kern = &self.gp.kernel;
        let w = scale / self.scale;
        let mut c = kern.k_grad_acc(x, &self.x_new, w, grad);
        for (xi, &a) in self.gp.data.inputs().iter().zip(&self.alpha) {
            c -= a * kern.k_grad_acc(x, xi, -w * a, grad);
        }
        c / self.scale
    }

    /// Gradient with respect to `x_new` of `Σ_i upstream[i] · σ̃(points[i]; x_new)`.
    pub fn backprop_x_new(&self, points: &[Vec<T>], upstream: &[T]) -> Vec<T> {
        let gp = self.gp;
        let kern = &gp.kernel;
        let dim = self.x_new.len();
        let mut grad = vec![T::zero(); dim];

        // Σ_i g_i c_i and the direct terms Σ_i (g_i / s) ∂k(x_new, x_i)/∂x_new.
        let inv_s = T::one() / self.scale;
        let mut gc = T::zero();
        let mut weighted_kx = vec![T::zero(); gp.len()];
        for (x, &g) in points.iter().zip(upstream) {
            if g == T::zero() {
                continue;
            }
            let c = kern.k_grad_acc(&self.x_new, x, g * inv_s, &mut grad)
                - dot(&gp.cross_cov(x), &self.alpha);
            gc += g * c;
            for (acc, xi) in weighted_kx.iter_mut().zip(gp.data.inputs()) {
                *acc += g * kern.k(x, xi);
            }
        }
        // −Σ_m v_m ∂k(x_new, X_m)/∂x_new with v = K⁻¹ Σ_i g_i k(X, x_i).
        let v = gp.solve(&weighted_kx);
        // ∂s²/∂x_new = −2 Σ_m α_m ∂k(x_new, X_m)/∂x_new  (stationary kernel)
        // contributes −(Σ g_i c_i) / (2 s³) · ∂s²/∂x_new.
        let var_coef = if self.clamped {
            T::zero()
        } else {
            gc * inv_s * inv_s * inv_s
        };
        for ((xi, &vm), &am) in gp.data.inputs().iter().zip(&v).zip(&self.alpha) {
            kern.k_grad_acc(&self.x_new, xi, -vm * inv_s + var_coef * am, &mut grad);
        }
        grad
    }

    pub fn fantasy(self, z: T) -> FantasySample<'a, T> {
        FantasySample { anchor: self, z }
    }
}

/// `μ^{n+1}(x) = μ^n(x) + σ̃(x; x_new) z`.
#[derive(Debug, Clone)]
pub struct FantasySample<'a, T> {
    anchor: Anchor<'a, T>,
    z: T,
}

impl<'a, T: Scalar> FantasySample<'a, T> {
    pub fn z(&self) -> T {
        self.z
    }

    pub fn anchor(&self) -> &Anchor<'a, T> {
        &self.anchor
    }

    pub fn mean(&self, x: &[T]) -> Result<T> {
        let gp = self.anchor.gp;
        gp.check(x)?;
        Ok(gp.mean_unchecked(x) + self.anchor.sigma_tilde(x) * self.z)
    }

    pub fn mean_with_grad(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        let gp = self.anchor.gp;
        gp.check(x)?;
        let mut g = vec![T::zero(); x.len()];
        let v = self.value_grad_acc(x, &mut g);
        Ok((v, g))
    }

    #[inline]
    pub(crate) fn value_grad_acc(&self, x: &[T], grad: &mut [T]) -> T {
        let m = self.anchor.gp.mean_grad_acc(x, T::one(), grad);
        m + self.anchor.sigma_tilde_grad_acc(x, self.z, grad) * self.z
    }
}
