//! The handful of statistical tests the verification suite leans on.
//!
//! Kolmogorov-Smirnov p-values use the asymptotic Kolmogorov distribution
//! with the Stephens small-sample correction; the chi-square and binomial
//! tails come from statrs. Nothing here is approximate beyond those
//! standard asymptotics, and every test reports its statistic alongside
//! the p-value so thresholds stay visible at call sites.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};

/// Sample mean and its standard error (zero for fewer than two values).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Tail of the Kolmogorov distribution: the limit law of sqrt(n) times
/// the KS statistic.
pub fn kolmogorov_p(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * z * z).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p: f64,
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let root = n_eff.sqrt();
    kolmogorov_p((root + 0.12 + 0.11 / root) * d)
}

/// One-sample KS test of `xs` against a distribution function.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest> {
    if xs.is_empty() {
        return Err(Error::Sampling("KS test needs at least one sample".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    Ok(KsTest { statistic: d, p: ks_p(d, n) })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Sampling("KS test needs samples on both sides".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("samples must not contain NaN"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("samples must not contain NaN"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsTest { statistic: d, p: ks_p(d, n_eff) })
}

#[derive(Debug, Clone, Copy)]
pub struct Chi2Test {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

/// Chi-square homogeneity test of two count vectors over the same
/// categories. Categories empty in both samples are dropped.
pub fn chi2_homogeneity(a: &[u64], b: &[u64]) -> Result<Chi2Test> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Sampling("count vectors must share nonzero length".into()));
    }
    let total_a: u64 = a.iter().sum();
    let total_b: u64 = b.iter().sum();
    if total_a == 0 || total_b == 0 {
        return Err(Error::Sampling("each sample needs at least one count".into()));
    }
    let grand = (total_a + total_b) as f64;
    let mut statistic = 0.0;
    let mut used = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        let col = (ca + cb) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        for (obs, row_total) in [(ca as f64, total_a as f64), (cb as f64, total_b as f64)] {
            let expected = row_total * col / grand;
            statistic += (obs - expected) * (obs - expected) / expected;
        }
    }
    let df = used.saturating_sub(1);
    let p = if df == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(df as f64)
            .expect("positive df")
            .cdf(statistic)
    };
    Ok(Chi2Test { statistic, df, p })
}

/// One-sided exact sign test: the probability of at least `hits` successes
/// in `trials` fair coin flips. Small p-values mean `hits` is too large to
/// be chance.
pub fn sign_test_p(hits: u64, trials: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Sampling("sign test needs at least one trial".into()));
    }
    if hits > trials {
        return Err(Error::Sampling(format!("{hits} hits in {trials} trials")));
    }
    if hits == 0 {
        return Ok(1.0);
    }
    let bin = Binomial::new(0.5, trials).expect("valid binomial");
    Ok(bin.sf(hits - 1).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, UniformSource};

    #[test]
    fn mean_stderr_hand_values() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        let (m, se) = mean_stderr(&[7.0]);
        assert_eq!((m, se), (7.0, 0.0));
        assert!(mean_stderr(&[]).0.is_nan());
    }

    #[test]
    fn kolmogorov_tail_hand_values() {
        assert_eq!(kolmogorov_p(0.0), 1.0);
        // classical critical points at levels 0.05 and 0.01
        assert!((kolmogorov_p(1.358) - 0.05).abs() < 2e-3);
        assert!((kolmogorov_p(1.628) - 0.01).abs() < 1e-3);
        assert!(kolmogorov_p(5.0) < 1e-10);
        for pair in [0.2, 0.7, 1.2, 2.0, 3.0].windows(2) {
            assert!(kolmogorov_p(pair[0]) > kolmogorov_p(pair[1]));
        }
    }

    #[test]
    fn one_sample_ks_accepts_the_true_law_and_rejects_a_wrong_one() {
        let mut rng = stream_rng(1, 0);
        let xs: Vec<f64> = (0..2000).map(|_| rng.uniform()).collect();
        let good = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(good.p > 0.01, "p {}", good.p);
        let bad = ks_one_sample(&xs, |x| (x * x).clamp(0.0, 1.0)).unwrap();
        assert!(bad.p < 1e-6, "p {}", bad.p);
    }

    #[test]
    fn two_sample_ks_hand_and_sampled_values() {
        let separated = ks_two_sample(&[0.1, 0.2], &[0.9, 0.95]).unwrap();
        assert!((separated.statistic - 1.0).abs() < 1e-12);

        let mut rng = stream_rng(2, 0);
        let a: Vec<f64> = (0..3000).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..3000).map(|_| rng.uniform()).collect();
        let same = ks_two_sample(&a, &b).unwrap();
        assert!(same.p > 0.01, "p {}", same.p);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let far = ks_two_sample(&a, &shifted).unwrap();
        assert!(far.p < 1e-6, "p {}", far.p);
    }

    #[test]
    fn chi2_hand_values() {
        let equal = chi2_homogeneity(&[50, 50], &[50, 50]).unwrap();
        assert_eq!(equal.df, 1);
        assert_eq!(equal.statistic, 0.0);
        assert!((equal.p - 1.0).abs() < 1e-12);

        // pooled expectation 50 per cell, each cell deviates by 40
        let opposite = chi2_homogeneity(&[90, 10], &[10, 90]).unwrap();
        assert!((opposite.statistic - 128.0).abs() < 1e-9);
        assert!(opposite.p < 1e-12);

        let padded = chi2_homogeneity(&[50, 50, 0], &[50, 50, 0]).unwrap();
        assert_eq!(padded.df, 1, "empty categories are dropped");
    }

    #[test]
    fn sign_test_hand_values() {
        assert!((sign_test_p(10, 10).unwrap() - 0.5f64.powi(10)).abs() < 1e-15);
        assert_eq!(sign_test_p(0, 10).unwrap(), 1.0);
        // P[Bin(10, 1/2) >= 5] = 319/512
        assert!((sign_test_p(5, 10).unwrap() - 319.0 / 512.0).abs() < 1e-12);
        assert!(sign_test_p(11, 10).is_err());
    }
}
