//! Seeded low-discrepancy sequences and reproducible random streams.
//!
//! The quasi-random generator is a Halton sequence with a seeded
//! Cranley–Patterson rotation: the same `(seed, dim)` always yields the same
//! points, and different seeds give independent-looking shifted copies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::normal;
use crate::Scalar;

/// Human-readable description of the generators below.
pub const GENERATOR: &str = "Halton with seeded Cranley-Patterson rotation; ChaCha8 pseudo-random streams; splitmix64 sub-stream seeds";

/// Deterministic RNG used everywhere a seed is accepted.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for a named sub-stream (splitmix64 finalizer).
pub fn substream(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Rotated Halton sequence over `[0,1)^dim`.
#[derive(Debug, Clone)]
pub struct Halton {
    bases: Vec<u64>,
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
        let shift = (0..dim).map(|_| r.random::<f64>()).collect();
        Self {
            bases: first_primes(dim),
            shift,
            index: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    pub fn next_point<T: Scalar>(&mut self) -> Vec<T> {
        let i = self.index;
        self.index += 1;
        self.bases
            .iter()
            .zip(&self.shift)
            .map(|(&b, &s)| {
                let u = (radical_inverse(i, b) + s).fract();
                T::lit(u)
            })
            .collect()
    }
}

/// `n` space-filling points in the unit box.
pub fn unit_points<T: Scalar>(n: usize, dim: usize, seed: u64) -> Vec<Vec<T>> {
    let mut h = Halton::new(dim, seed);
    (0..n).map(|_| h.next_point()).collect()
}

/// `n` quasi-random standard-normal values: a rotated base-2 van der Corput
/// sequence pushed through the normal quantile.
pub fn gaussian_stream<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut h = Halton::new(1, seed);
    (0..n)
        .map(|_| {
            let u: f64 = h.next_point::<f64>()[0];
            // keep away from the open-interval endpoints
            let u = u.clamp(1e-16, 1.0 - 1e-16);
            normal::inv_cdf(T::lit(u))
        })
        .collect()
}
