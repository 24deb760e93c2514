//! Reproducible randomness: stream-keyed generators and the primitive draws
//! every sampler is built from.
//!
//! All stochastic operations consume uniforms in a fixed, documented order,
//! one per categorical draw and one per exponential draw, so a (seed,
//! stream) pair pins an entire trajectory bitwise.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::check_prob_vec;

/// Uniform variates on [0, 1) with 53-bit resolution, from any raw
/// generator. Blanket-implemented for everything random, so tests can force
/// exact draw sequences with a stub `RngCore`.
pub trait UniformSource {
    fn uniform(&mut self) -> f64;
}

impl<R: RngCore + ?Sized> UniformSource for R {
    fn uniform(&mut self) -> f64 {
        // top 53 bits, the usual open-interval construction
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Generator for a (seed, stream) pair. Same pair, same sequence; distinct
/// stream ids give sequences independent for all practical purposes, which
/// is what keeps parallel ensembles schedule-independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exponential draw by inverse CDF: -ln(1-u)/lambda. u = 0 maps to t = 0,
/// which downstream code treats as a valid zero-length flow segment.
pub fn exponential_time<R: UniformSource + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    -(1.0 - rng.uniform()).ln() / lambda
}

/// Index drawn from a probability vector by cumulative sums in index order.
/// Intervals are [c_{k-1}, c_k); the final interval is closed, so a draw
/// landing exactly on an interior boundary resolves to the right.
pub fn categorical<R: UniformSource + ?Sized>(
    weights: &[f64],
    context: &str,
    rng: &mut R,
) -> Result<usize> {
    check_prob_vec(weights, context)?;
    Ok(categorical_at(weights, rng.uniform()))
}

/// The deterministic part of `categorical`: which index a given uniform
/// falls into.
pub fn categorical_at(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}
