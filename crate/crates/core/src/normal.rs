//! Standard normal density, distribution and quantile functions.
//!
//! Evaluated in `f64` (`libm` for erfc, `statrs` for the quantile) and cast
//! back to the working scalar.

use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::OnceLock;

use crate::Scalar;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf<T: Scalar>(z: T) -> T {
    if z.is_infinite() {
        return T::zero();
    }
    let z = z.as_f64();
    T::lit(FRAC_1_SQRT_2PI * (-0.5 * z * z).exp())
}

pub fn cdf<T: Scalar>(z: T) -> T {
    if z.is_infinite() {
        return if z > T::zero() { T::one() } else { T::zero() };
    }
    T::lit(0.5 * libm::erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

/// Upper tail `1 - Φ(z)` without cancellation for large `z`.
pub fn sf<T: Scalar>(z: T) -> T {
    cdf(-z)
}

/// Φ(b) − Φ(a) for `a ≤ b`, computed on whichever tail avoids cancellation.
pub fn cdf_diff<T: Scalar>(a: T, b: T) -> T {
    if a > T::zero() {
        sf(a) - sf(b)
    } else {
        cdf(b) - cdf(a)
    }
}

pub fn inv_cdf<T: Scalar>(p: T) -> T {
    static STD: OnceLock<Normal> = OnceLock::new();
    let n = STD.get_or_init(Normal::standard);
    T::lit(n.inverse_cdf(p.as_f64()))
}
