//! Stationary covariance functions on scaled Euclidean distance.

use super::posterior::JITTER_LEVELS;
use crate::error::{ensure, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    SquaredExponential,
    /// `σ0 (1 + √5 r + 5r²/3) exp(−√5 r)`
    Matern52,
}

/// Kernel hyperparameters plus the observation noise and diagonal jitter
/// used when the Gram matrix is factorized.
///
/// `signal_variance` is the prior variance `k(x, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig<T> {
    pub kind: KernelKind,
    pub signal_variance: T,
    pub lengthscales: Vec<T>,
    pub noise_variance: T,
    pub jitter: T,
}

impl<T: Scalar> KernelConfig<T> {
    pub fn new(
        kind: KernelKind,
        signal_variance: T,
        lengthscales: Vec<T>,
        noise_variance: T,
    ) -> Result<Self> {
        let cfg = Self {
            kind,
            signal_variance,
            lengthscales,
            noise_variance,
            jitter: T::lit(JITTER_LEVELS[0]),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Squared-exponential kernel with the same lengthscale on every axis.
    pub fn isotropic_se(dim: usize, signal_variance: T, lengthscale: T, noise: T) -> Result<Self> {
        Self::new(
            KernelKind::SquaredExponential,
            signal_variance,
            vec![lengthscale; dim],
            noise,
        )
    }

    pub fn with_jitter(mut self, jitter: T) -> Result<Self> {
        self.jitter = jitter;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.signal_variance > T::zero() && self.signal_variance.is_finite(),
            || format!("signal variance must be positive, got {}", self.signal_variance),
        )?;
        ensure(!self.lengthscales.is_empty(), || "no lengthscales".into())?;
        ensure(
            self.lengthscales.iter().all(|&l| l > T::zero() && l.is_finite()),
            || format!("lengthscales must be positive: {:?}", self.lengthscales),
        )?;
        ensure(self.noise_variance >= T::zero(), || {
            format!("noise variance must be nonnegative, got {}", self.noise_variance)
        })?;
        ensure(self.jitter >= T::zero(), || {
            format!("jitter must be nonnegative, got {}", self.jitter)
        })
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub(crate) fn check_dim(&self, x: &[T]) -> Result<()> {
        ensure(x.len() == self.dim(), || {
            format!("point has dimension {}, kernel expects {}", x.len(), self.dim())
        })
    }

    fn scaled_sq_dist(&self, x: &[T], x2: &[T]) -> T {
        x.iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .fold(T::zero(), |acc, ((&a, &b), &l)| {
                let d = (a - b) / l;
                acc + d * d
            })
    }

    /// Kernel value and its derivative with respect to `r²`.
    #[inline]
    fn profile(&self, r2: T) -> (T, T) {
        let half = T::lit(0.5);
        match self.kind {
            KernelKind::SquaredExponential => {
                let k = self.signal_variance * (-half * r2).exp();
                (k, -half * k)
            }
            KernelKind::Matern52 => {
                let s5 = T::lit(5.0).sqrt();
                let r = r2.sqrt();
                let e = (-s5 * r).exp();
                let k = self.signal_variance * (T::one() + s5 * r + T::lit(5.0 / 3.0) * r2) * e;
                let dk = -self.signal_variance * T::lit(5.0 / 6.0) * (T::one() + s5 * r) * e;
                (k, dk)
            }
        }
    }

    /// `k(x, x2)` without dimension checks.
    #[inline]
    pub(crate) fn k(&self, x: &[T], x2: &[T]) -> T {
        self.profile(self.scaled_sq_dist(x, x2)).0
    }

    /// `k(x, x2)`; adds `scale · ∂k/∂x` into `grad`.
    #[inline]
    pub(crate) fn k_grad_acc(&self, x: &[T], x2: &[T], scale: T, grad: &mut [T]) -> T {
        let (k, dk) = self.profile(self.scaled_sq_dist(x, x2));
        let two = T::lit(2.0);
        for (((g, &a), &b), &l) in grad.iter_mut().zip(x).zip(x2).zip(&self.lengthscales) {
            *g += scale * dk * two * (a - b) / (l * l);
        }
        k
    }

    /// Gram matrix `k(X, X)` in row-major order.
    pub(crate) fn gram(&self, xs: &[Vec<T>]) -> Vec<T> {
        let n = xs.len();
        let mut g = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.k(&xs[i], &xs[j]);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }
}

/// Evaluates the kernel, checking that both points match its dimension.
pub fn kernel_eval<T: Scalar>(cfg: &KernelConfig<T>, x: &[T], x2: &[T]) -> Result<T> {
    cfg.check_dim(x)?;
    cfg.check_dim(x2)?;
    Ok(cfg.k(x, x2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn se(l: f64) -> KernelConfig<f64> {
        KernelConfig::isotropic_se(1, 1.0, l, 0.0).unwrap()
    }

    #[test]
    fn rbf_identity_and_unit_distance() {
        assert_eq!(kernel_eval(&se(0.3), &[0.4], &[0.4]).unwrap(), 1.0);
        assert_relative_eq!(
            kernel_eval(&se(1.0), &[0.0], &[1.0]).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(kernel_eval(&se(1.0), &[1.0], &[0.0]).unwrap(), 0.606_530_659_712_633, epsilon = 1e-12);
    }

    #[test]
    fn matern_identity() {
        let m = KernelConfig::new(KernelKind::Matern52, 2.5, vec![0.2, 0.7], 0.0).unwrap();
        assert_eq!(kernel_eval(&m, &[0.1, 0.9], &[0.1, 0.9]).unwrap(), 2.5);
    }

    #[test]
    fn matern_closed_form() {
        let m = KernelConfig::new(KernelKind::Matern52, 1.0, vec![2.0], 0.0).unwrap();
        let r: f64 = 0.5;
        let s5 = 5f64.sqrt();
        let want = (1.0 + s5 * r + 5.0 * r * r / 3.0) * (-s5 * r).exp();
        assert_relative_eq!(m.k(&[0.0], &[1.0]), want, max_relative = 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let cfg = se(1.0);
        assert!(matches!(
            kernel_eval(&cfg, &[0.0, 1.0], &[0.0]),
            Err(crate::Error::Contract(_))
        ));
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        assert!(KernelConfig::isotropic_se(1, 0.0, 1.0, 0.0).is_err());
        assert!(KernelConfig::isotropic_se(1, 1.0, -1.0, 0.0).is_err());
        assert!(KernelConfig::isotropic_se(1, 1.0, 1.0, -1e-3).is_err());
        assert!(se(1.0).with_jitter(-1.0).is_err());
    }

    #[test]
    fn gradient_matches_central_difference() {
        for kind in [KernelKind::SquaredExponential, KernelKind::Matern52] {
            let cfg = KernelConfig::new(kind, 1.7, vec![0.3, 0.8], 0.0).unwrap();
            let x = [0.2, 0.55];
            let x2 = [0.45, 0.1];
            let mut g = [0.0; 2];
            cfg.k_grad_acc(&x, &x2, 1.0, &mut g);
            let h = 1e-6;
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = (cfg.k(&xp, &x2) - cfg.k(&xm, &x2)) / (2.0 * h);
                assert_relative_eq!(g[j], fd, max_relative = 1e-7);
            }
        }
    }
}
