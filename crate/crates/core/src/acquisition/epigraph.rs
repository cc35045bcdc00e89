//! Exact expectation of the upper envelope of lines `μ_i + σ_i Z`,
//! `Z ~ N(0, 1)`.
//!
//! Lines are sorted by slope, dominated lines are pruned while the envelope's
//! breakpoints are found, and the expectation is then a finite sum of normal
//! pdf/cdf differences over the surviving segments.

use crate::error::{ensure, Result};
use crate::normal;
use crate::Scalar;

/// Slopes closer than this are treated as parallel; only the higher of two
/// parallel lines can ever be on the envelope.
pub const SLOPE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult<T> {
    /// Input indices of the lines on the envelope, in increasing slope order.
    pub kept: Vec<usize>,
    /// Breakpoints in z, with `−∞` and `+∞` sentinels; `kept.len() + 1` long.
    pub intersections: Vec<T>,
    /// `φ(Z̃[k+1]) − φ(Z̃[k])` per kept line.
    pub pdf_diff: Vec<T>,
    /// `Φ(Z̃[k+1]) − Φ(Z̃[k])` per kept line.
    pub cdf_diff: Vec<T>,
    /// Index of the (first) maximal intercept.
    pub argmax: usize,
    /// `E[max_i (μ_i + σ_i Z)] − max_i μ_i`
    pub value: T,
}

impl<T: Scalar> EnvelopeResult<T> {
    /// `∂value/∂μ_i` for every input line.
    pub fn grad_mu(&self, n: usize) -> Vec<T> {
        let mut g = vec![T::zero(); n];
        for (&i, &b) in self.kept.iter().zip(&self.cdf_diff) {
            g[i] += b;
        }
        g[self.argmax] -= T::one();
        g
    }

    /// `∂value/∂σ_i` for every input line.
    pub fn grad_sigma(&self, n: usize) -> Vec<T> {
        let mut g = vec![T::zero(); n];
        for (&i, &a) in self.kept.iter().zip(&self.pdf_diff) {
            g[i] = -a;
        }
        g
    }
}

/// Computes `E_Z[max_i(μ_i + σ_i Z)] − max_i μ_i` exactly.
pub fn epigraph_expectation<T: Scalar>(mu: &[T], sigma: &[T]) -> Result<EnvelopeResult<T>> {
    ensure(!mu.is_empty() && mu.len() == sigma.len(), || {
        format!("need equal nonempty line sets, got {} and {}", mu.len(), sigma.len())
    })?;
    ensure(
        mu.iter().chain(sigma).all(|v| v.is_finite()),
        || "line intercepts and slopes must be finite".into(),
    )?;

    let argmax = mu
        .iter()
        .enumerate()
        .fold(0, |best, (i, &m)| if m > mu[best] { i } else { best });
    let top = mu[argmax];

    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| {
        sigma[a]
            .partial_cmp(&sigma[b])
            .expect("finite")
            .then(mu[a].partial_cmp(&mu[b]).expect("finite"))
    });

    // Collapse near-parallel runs to their highest line.
    let tie = T::lit(SLOPE_TIE);
    let mut lines: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        match lines.last_mut() {
            Some(last) if (sigma[i] - sigma[*last]).abs() <= tie => {
                if mu[i] > mu[*last] {
                    *last = i;
                }
            }
            _ => lines.push(i),
        }
    }

    let mut kept: Vec<usize> = Vec::with_capacity(lines.len());
    let mut z: Vec<T> = Vec::with_capacity(lines.len() + 1);
    kept.push(lines[0]);
    z.push(T::neg_infinity());
    for &i in &lines[1..] {
        loop {
            let j = *kept.last().expect("nonempty");
            let c = (mu[j] - mu[i]) / (sigma[i] - sigma[j]);
            if c <= *z.last().expect("nonempty") {
                kept.pop();
                z.pop();
                continue;
            }
            kept.push(i);
            z.push(c);
            break;
        }
    }
    z.push(T::infinity());

    let mut pdf_diff = Vec::with_capacity(kept.len());
    let mut cdf_diff = Vec::with_capacity(kept.len());
    let mut value = T::zero();
    for (k, &i) in kept.iter().enumerate() {
        let a = normal::pdf(z[k + 1]) - normal::pdf(z[k]);
        let b = normal::cdf_diff(z[k], z[k + 1]);
        value += b * (mu[i] - top) - a * sigma[i];
        pdf_diff.push(a);
        cdf_diff.push(b);
    }

    Ok(EnvelopeResult {
        kept,
        intersections: z,
        pdf_diff,
        cdf_diff,
        argmax,
        value,
    })
}
