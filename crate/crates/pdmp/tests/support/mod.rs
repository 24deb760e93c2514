//! Independent oracles shared by integration tests.
//!
//! Everything here is computed from closed forms or elementary algorithms
//! that do not touch the library's samplers, quadrature, or transport
//! solver, so agreement is evidence rather than tautology.
// Each test target compiles its own copy and uses its own subset.
#![allow(dead_code)]

/// Moments of the stationary law of the scalar recursion
/// x' = e^{-T} x / 2 + c with T ~ Exp(lambda), obtained by iterating the
/// moment fixed-point equations to the given tolerance.
///
/// E e^{-T} = lambda/(lambda+1) and E e^{-2T} = lambda/(lambda+2) are the
/// only inputs; both are one-line integrals.
pub fn stationary_moments(lambda: f64, c: f64, tol: f64) -> (f64, f64) {
    let r1 = lambda / (lambda + 1.0);
    let r2 = lambda / (lambda + 2.0);
    let mut mean = 0.0;
    loop {
        let next = 0.5 * r1 * mean + c;
        if (next - mean).abs() < tol {
            mean = next;
            break;
        }
        mean = next;
    }
    let mut second = 0.0;
    loop {
        let next = 0.25 * r2 * second + c * r1 * mean + c * c;
        if (next - second).abs() < tol {
            second = next;
            break;
        }
        second = next;
    }
    (mean, second)
}

/// Exact 1-d Wasserstein-1 distance between weighted atom lists via the CDF
/// difference integral. Matches the bounded-Lipschitz value whenever the
/// combined support has diameter at most 2, since the cap |f| <= 1 is then
/// inactive after centering.
pub fn w1_sorted_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.iter().map(|&(x, w)| (x, w)));
    events.extend(b.iter().map(|&(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut dist = 0.0;
    let mut cdf_gap: f64 = 0.0;
    let mut prev = events[0].0;
    for (x, w) in events {
        dist += cdf_gap.abs() * (x - prev);
        cdf_gap += w;
        prev = x;
    }
    dist
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical frequency of `hits` out of `n` with a 99.7% normal-approximation
/// confidence half-width.
pub fn freq_ci(hits: usize, n: usize) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    let half = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
    (p, half)
}
