//! Verdicts about a system: does the averaged contraction criterion hold,
//! does the distance-to-anchor observable drift back, what do the
//! contraction constants look like when sampled, where does the chain
//! settle, do running averages converge, and how fast do two ensembles
//! approach each other.
//!
//! Everything here is empirical. Constants carry their provenance, sampled
//! estimates are lower-bound candidates rather than certificates, and rate
//! fits refuse to read signal into distances that sit below the measured
//! noise floor.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{fm_distance, subsample, EmpiricalMeasure, SUPPORT_CAP};
use crate::model::{evaluate_flow, ModelConstants, Provenance, SystemSpec};
use crate::quad::QuadratureSpec;
use crate::rng::{exponential_time, stream_rng, UniformSource};
use crate::sim::{draw_initial_flow, sample_ensemble, step_chain, EnsembleInit};
use crate::space::HybridState;
use crate::stats::mean_stderr;

/// Outcome of the averaged contraction check, with the drift constants
/// that come out of the same computation.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub satisfied: bool,
    /// L * L_q + alpha / lambda; the criterion asks for strictly below 1.
    pub lhs: f64,
    /// lambda * L * L_q / (lambda - alpha), the averaged one-step
    /// contraction factor of paired chains.
    pub beta: f64,
    /// Drift multiplier for the distance-to-anchor observable (equals beta).
    pub a: f64,
    /// Drift offset: the averaged one-step displacement of the anchor.
    pub b: f64,
    pub reason: Option<String>,
}

/// Evaluates the contraction criterion from the system's constants and
/// computes the drift pair (a, b). The offset b integrates the anchor's
/// post-jump displacement over every flow and jump index by quadrature.
///
/// A jump rate at or below the flow growth rate leaves the drift constants
/// undefined; that case is reported unsatisfied, not raised.
pub fn check_contraction_criterion(
    spec: &SystemSpec,
    quad: &QuadratureSpec,
) -> Result<CriterionReport> {
    let k = spec.constants()?.clone();
    let lambda = spec.lambda;
    let lhs = k.flow_lip * k.jump_lip + k.flow_rate / lambda;
    if lambda <= k.flow_rate {
        return Ok(CriterionReport {
            satisfied: false,
            lhs,
            beta: f64::NAN,
            a: f64::NAN,
            b: f64::NAN,
            reason: Some(format!(
                "a undefined: jump rate {lambda} does not exceed flow growth rate {}",
                k.flow_rate
            )),
        });
    }
    let beta = lambda * k.flow_lip * k.jump_lip / (lambda - k.flow_rate);
    let b = anchor_drift_offset(spec, &k.anchor, quad)?;
    let satisfied = lhs < 1.0;
    let reason =
        (!satisfied).then(|| format!("criterion value {lhs} is not strictly below 1"));
    Ok(CriterionReport { satisfied, lhs, beta, a: beta, b, reason })
}

fn anchor_drift_offset(spec: &SystemSpec, anchor: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    if anchor.len() != spec.space.dimension {
        return Err(Error::Config(format!(
            "anchor has {} coordinates in a {}-dimensional space",
            anchor.len(),
            spec.space.dimension
        )));
    }
    let rule = quad.rule(spec.lambda)?;
    let anchor_images: Vec<Vec<f64>> =
        spec.jumps.iter().map(|q| q.apply(anchor)).collect();
    let mut b = 0.0;
    for j in 0..spec.n_flows() {
        for &(t, w) in &rule {
            let y = evaluate_flow(spec, j, t, anchor)?;
            for (q, image) in spec.jumps.iter().zip(&anchor_images) {
                b += w * spec.space.distance(&q.apply(&y), image);
            }
        }
    }
    for image in &anchor_images {
        b += spec.space.distance(image, anchor);
    }
    if !b.is_finite() {
        return Err(Error::Numeric("anchor drift offset is not finite".into()));
    }
    Ok(b)
}

/// The set of jump times at which a switch-then-jump transition contracts
/// a pair's distance strictly below the averaged factor beta.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContractionWindow {
    /// Window boundary, in seconds (infinite when the window is empty).
    pub t0: f64,
    /// Exponential-clock mass of the window.
    pub r: f64,
    /// Whether the window sits above t0 (contracting flows) rather than
    /// below it (expanding flows).
    pub late: bool,
}

/// Solves L L_q e^{alpha t} < beta for the jump time t. With contracting
/// flows the inequality holds for large t, with expanding flows for small
/// t, and at alpha = 0 (or a zero jump factor) for no t at all.
pub fn contraction_window(spec: &SystemSpec) -> Result<ContractionWindow> {
    let k = spec.constants()?;
    let lambda = spec.lambda;
    if lambda <= k.flow_rate {
        return Err(Error::Config(format!(
            "jump rate {lambda} must exceed flow growth rate {}",
            k.flow_rate
        )));
    }
    let ll_q = k.flow_lip * k.jump_lip;
    if ll_q <= 0.0 || k.flow_rate == 0.0 {
        return Ok(ContractionWindow { t0: f64::INFINITY, r: 0.0, late: true });
    }
    // beta / (L L_q) = lambda / (lambda - alpha)
    let t0 = (lambda / (lambda - k.flow_rate)).ln() / k.flow_rate;
    if k.flow_rate < 0.0 {
        Ok(ContractionWindow { t0, r: (-lambda * t0).exp(), late: true })
    } else {
        Ok(ContractionWindow { t0, r: 1.0 - (-lambda * t0).exp(), late: false })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovProbe {
    pub x: Vec<f64>,
    pub flow: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    pub a: f64,
    pub b: f64,
    pub probes: Vec<LyapunovProbe>,
    /// Largest excess of an estimate over its slack-padded bound;
    /// nonpositive when every probe passes.
    pub max_violation: f64,
    pub all_pass: bool,
}

/// Monte Carlo check of the one-step drift bound
/// E[dist(x', anchor)] <= a * dist(x, anchor) + b at each probe state,
/// with three standard errors of slack. Probe p replicates on stream p.
pub fn verify_lyapunov(
    spec: &SystemSpec,
    probes: &[HybridState],
    n_rep: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<LyapunovReport> {
    if n_rep < 100 {
        return Err(Error::Config(format!("drift check needs n_rep >= 100, got {n_rep}")));
    }
    if probes.is_empty() {
        return Err(Error::Config("drift check needs at least one probe".into()));
    }
    let report = check_contraction_criterion(spec, quad)?;
    if !report.a.is_finite() {
        return Err(Error::Config(
            report.reason.unwrap_or_else(|| "drift constants undefined".into()),
        ));
    }
    let anchor = spec.constants()?.anchor.clone();
    let (a, b) = (report.a, report.b);
    let mut out = Vec::with_capacity(probes.len());
    let mut max_violation = f64::NEG_INFINITY;
    for (p, probe) in probes.iter().enumerate() {
        let mut rng = stream_rng(seed, p as u64);
        let mut draws = Vec::with_capacity(n_rep);
        for _ in 0..n_rep {
            let (next, _) = step_chain(spec, probe, &mut rng)?;
            draws.push(spec.space.distance(&next.x, &anchor));
        }
        let (estimate, stderr) = mean_stderr(&draws);
        let bound = a * spec.space.distance(&probe.x, &anchor) + b;
        let violation = estimate - (bound + 3.0 * stderr);
        max_violation = max_violation.max(violation);
        out.push(LyapunovProbe {
            x: probe.x.clone(),
            flow: probe.flow,
            estimate,
            stderr,
            bound,
            pass: violation <= 0.0,
        });
    }
    let all_pass = out.iter().all(|p| p.pass);
    Ok(LyapunovReport { a, b, probes: out, max_violation, all_pass })
}

fn probe_point<R: UniformSource + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| (2.0 * rng.uniform() - 1.0) * radius).collect()
}

fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Samples contraction constants from random probe pairs in the cube the
/// space hints at (radius 3 when it hints nothing).
///
/// The flow pair (L, alpha) comes from a log-linear regression of the
/// per-time sup ratios of switch-weighted flow distances; the jump and
/// probability Lipschitz bounds are sup ratios, the overlaps empirical
/// minima. All of them are lower-bound candidates over the probed region,
/// marked estimated, and never a substitute for analytic metadata.
pub fn estimate_constants(
    spec: &SystemSpec,
    n_pairs: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<ModelConstants> {
    if n_pairs < 100 {
        return Err(Error::Config(format!("estimation needs n_pairs >= 100, got {n_pairs}")));
    }
    if t_grid.len() < 2 {
        return Err(Error::Config("estimation needs at least two grid times".into()));
    }
    for &t in t_grid {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!("grid time {t} is not a finite nonnegative real")));
        }
    }
    let dim = spec.space.dimension;
    let radius = spec.space.bounded_hint.unwrap_or(3.0);
    let mut rng = stream_rng(seed, 0);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let x = probe_point(dim, radius, &mut rng);
        let y = probe_point(dim, radius, &mut rng);
        if spec.space.distance(&x, &y) > 0.0 {
            pairs.push((x, y));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Sampling("every probe pair was coincident".into()));
    }

    let n_flows = spec.n_flows();
    let mut flow_sup = vec![0.0f64; t_grid.len()];
    let mut jump_lip = 0.0f64;
    let mut switch_lip = 0.0f64;
    let mut jump_prob_lip = 0.0f64;
    let mut switch_overlap = f64::INFINITY;
    let mut jump_overlap = f64::INFINITY;
    for (x, y) in &pairs {
        let rho = spec.space.distance(x, y);
        let rows_x: Vec<Vec<f64>> =
            (0..n_flows).map(|i| spec.probs.flow_matrix.row(x, i)).collect();
        let rows_y: Vec<Vec<f64>> =
            (0..n_flows).map(|i| spec.probs.flow_matrix.row(y, i)).collect();

        for (ti, &t) in t_grid.iter().enumerate() {
            let dists: Vec<f64> = (0..n_flows)
                .map(|j| {
                    Ok(spec
                        .space
                        .distance(&evaluate_flow(spec, j, t, x)?, &evaluate_flow(spec, j, t, y)?))
                })
                .collect::<Result<_>>()?;
            for row in &rows_y {
                let weighted: f64 = row.iter().zip(&dists).map(|(p, d)| p * d).sum();
                flow_sup[ti] = flow_sup[ti].max(weighted / rho);
            }
        }

        let pj_x = spec.probs.jump_dist.evaluate(x);
        let pj_y = spec.probs.jump_dist.evaluate(y);
        let weighted: f64 = spec
            .jumps
            .iter()
            .zip(&pj_x)
            .map(|(q, p)| p * spec.space.distance(&q.apply(x), &q.apply(y)))
            .sum();
        jump_lip = jump_lip.max(weighted / rho);
        let diff: f64 = pj_x.iter().zip(&pj_y).map(|(a, b)| (a - b).abs()).sum();
        jump_prob_lip = jump_prob_lip.max(diff / rho);
        let overlap: f64 = pj_x.iter().zip(&pj_y).map(|(a, b)| a.min(*b)).sum();
        jump_overlap = jump_overlap.min(overlap);

        for rx in &rows_x {
            for ry in &rows_y {
                let overlap: f64 = rx.iter().zip(ry).map(|(a, b)| a.min(*b)).sum();
                switch_overlap = switch_overlap.min(overlap);
            }
        }
        for (rx, ry) in rows_x.iter().zip(&rows_y) {
            let diff: f64 = rx.iter().zip(ry).map(|(a, b)| (a - b).abs()).sum();
            switch_lip = switch_lip.max(diff / rho);
        }
    }

    let pts: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(&flow_sup)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&t, &s)| (t, s.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Sampling("flow distance ratios vanished on the whole grid".into()));
    }
    let (flow_rate, intercept) = least_squares(&pts)
        .ok_or_else(|| Error::Config("grid times must not all coincide".into()))?;
    let flow_lip = intercept.exp().max(1.0);

    let anchor = spec
        .constants
        .as_ref()
        .map(|k| k.anchor.clone())
        .unwrap_or_else(|| vec![0.0; dim]);
    Ok(ModelConstants {
        flow_lip,
        flow_rate,
        jump_lip,
        switch_lip,
        jump_prob_lip,
        switch_overlap,
        jump_overlap,
        anchor,
        provenance: Provenance::Estimated,
    })
}

/// Empirical lower bounds on the overlap constants, with the probe that
/// attains the flow-side minimum.
#[derive(Debug, Clone, Serialize)]
pub struct S1Report {
    pub p0_hat: f64,
    pub q0_hat: f64,
    pub worst_x: Vec<f64>,
    pub worst_y: Vec<f64>,
    pub worst_rows: (usize, usize),
    pub worst_t: f64,
}

// Membership slack for the index-set tests below: the certified bounds are
// often attained exactly, and a one-ulp excess must not empty the set.
const MEMBER_SLACK: f64 = 1.0 + 1e-12;

/// Minimizes, over sampled pairs, rows, and jump times, the joint weight
/// of flow indices along which the pair contracts within L e^{alpha t},
/// and the joint weight of jump indices contracting within L_q. The two
/// minima are candidates for the overlap constants of the metadata.
pub fn check_s1(
    spec: &SystemSpec,
    n_pairs: usize,
    t_samples: usize,
    seed: u64,
) -> Result<S1Report> {
    if n_pairs == 0 || t_samples == 0 {
        return Err(Error::Config("overlap scan needs n_pairs and t_samples >= 1".into()));
    }
    let k = spec.constants()?.clone();
    let dim = spec.space.dimension;
    let radius = spec.space.bounded_hint.unwrap_or(3.0);
    let n_flows = spec.n_flows();
    let mut rng = stream_rng(seed, 0);
    let mut p0 = f64::INFINITY;
    let mut q0 = f64::INFINITY;
    let mut worst = (Vec::new(), Vec::new(), (0usize, 0usize), 0.0f64);
    let mut usable = 0usize;
    for _ in 0..n_pairs {
        let x = probe_point(dim, radius, &mut rng);
        let y = probe_point(dim, radius, &mut rng);
        let rho = spec.space.distance(&x, &y);
        if rho == 0.0 {
            continue;
        }
        usable += 1;

        let pj_x = spec.probs.jump_dist.evaluate(&x);
        let pj_y = spec.probs.jump_dist.evaluate(&y);
        let mut q_sum = 0.0;
        for (s, q) in spec.jumps.iter().enumerate() {
            if spec.space.distance(&q.apply(&x), &q.apply(&y)) <= k.jump_lip * rho * MEMBER_SLACK {
                q_sum += pj_x[s] * pj_y[s];
            }
        }
        q0 = q0.min(q_sum);

        let rows_x: Vec<Vec<f64>> =
            (0..n_flows).map(|i| spec.probs.flow_matrix.row(&x, i)).collect();
        let rows_y: Vec<Vec<f64>> =
            (0..n_flows).map(|i| spec.probs.flow_matrix.row(&y, i)).collect();
        for _ in 0..t_samples {
            let t = exponential_time(spec.lambda, &mut rng);
            let cap = k.flow_lip * (k.flow_rate * t).exp() * rho * MEMBER_SLACK;
            let member: Vec<bool> = (0..n_flows)
                .map(|j| {
                    Ok(spec.space.distance(
                        &evaluate_flow(spec, j, t, &x)?,
                        &evaluate_flow(spec, j, t, &y)?,
                    ) <= cap)
                })
                .collect::<Result<_>>()?;
            for (i1, rx) in rows_x.iter().enumerate() {
                for (i2, ry) in rows_y.iter().enumerate() {
                    let sum: f64 = member
                        .iter()
                        .zip(rx.iter().zip(ry))
                        .filter(|(m, _)| **m)
                        .map(|(_, (a, b))| a * b)
                        .sum();
                    if sum < p0 {
                        p0 = sum;
                        worst = (x.clone(), y.clone(), (i1, i2), t);
                    }
                }
            }
        }
    }
    if usable == 0 {
        return Err(Error::Sampling("every probe pair was coincident".into()));
    }
    Ok(S1Report {
        p0_hat: p0,
        q0_hat: q0,
        worst_x: worst.0,
        worst_y: worst.1,
        worst_rows: worst.2,
        worst_t: worst.3,
    })
}

/// Empirical measure of a thinned post-burn-in chain, run on stream 0 of
/// the seed. A missing start flow is drawn from the initial law on the
/// same generator.
pub fn estimate_invariant(
    spec: &SystemSpec,
    burn_in: usize,
    n_keep: usize,
    thin: usize,
    x0: &[f64],
    xi0: Option<usize>,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    if n_keep == 0 {
        return Err(Error::Config("n_keep must be at least 1".into()));
    }
    if thin == 0 {
        return Err(Error::Config("thin must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let flow0 = match xi0 {
        Some(i) => i,
        None => draw_initial_flow(spec, x0, &mut rng)?,
    };
    let mut state = HybridState::new(x0.to_vec(), flow0);
    let mut kept = Vec::with_capacity(n_keep);
    for step in 1..=(burn_in + n_keep * thin) {
        let (next, _) = step_chain(spec, &state, &mut rng)?;
        state = next;
        if step > burn_in && (step - burn_in) % thin == 0 {
            kept.push(state.clone());
        }
    }
    EmpiricalMeasure::from_states(&spec.space, &kept)
}

#[derive(Debug, Clone, Serialize)]
pub struct LLNReport {
    pub checkpoints: Vec<usize>,
    /// Integral of the observable against the supplied invariant estimate.
    pub reference: f64,
    /// Running averages, one row per seed, one column per checkpoint.
    pub per_seed: Vec<Vec<f64>>,
    /// Median over seeds of |average - reference|, per checkpoint.
    pub median_abs_error: Vec<f64>,
    pub final_abs_error: f64,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("errors are finite"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Running averages (1/n) sum of f over the first n states, recorded at
/// each checkpoint for each seed, against the invariant-estimate integral
/// of f. The average includes the start state; seed s runs its chain on
/// stream 0 of generator seed s.
#[allow(clippy::too_many_arguments)]
pub fn lln_run(
    spec: &SystemSpec,
    f: &dyn Fn(&HybridState) -> f64,
    x0: &[f64],
    xi0: Option<usize>,
    n: usize,
    checkpoints: &[usize],
    seeds: &[u64],
    invariant: &EmpiricalMeasure,
) -> Result<LLNReport> {
    if n == 0 || seeds.is_empty() || checkpoints.is_empty() {
        return Err(Error::Config("LLN run needs n >= 1, seeds, and checkpoints".into()));
    }
    for w in checkpoints.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config("checkpoints must be strictly increasing".into()));
        }
    }
    if checkpoints[0] == 0 || *checkpoints.last().expect("nonempty") > n {
        return Err(Error::Config(format!("checkpoints must lie in 1..={n}")));
    }
    let reference = invariant.integrate(f);
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let mut rng = stream_rng(s, 0);
        let flow0 = match xi0 {
            Some(i) => i,
            None => draw_initial_flow(spec, x0, &mut rng)?,
        };
        let mut state = HybridState::new(x0.to_vec(), flow0);
        let mut sum = f(&state);
        let mut count = 1usize;
        let mut row = Vec::with_capacity(checkpoints.len());
        let mut next_cp = 0usize;
        while next_cp < checkpoints.len() && checkpoints[next_cp] == count {
            row.push(sum / count as f64);
            next_cp += 1;
        }
        for _ in 1..n {
            let (next, _) = step_chain(spec, &state, &mut rng)?;
            state = next;
            sum += f(&state);
            count += 1;
            while next_cp < checkpoints.len() && checkpoints[next_cp] == count {
                row.push(sum / count as f64);
                next_cp += 1;
            }
        }
        per_seed.push(row);
    }
    let median_abs_error: Vec<f64> = (0..checkpoints.len())
        .map(|c| {
            let mut errs: Vec<f64> =
                per_seed.iter().map(|row| (row[c] - reference).abs()).collect();
            median(&mut errs)
        })
        .collect();
    let final_abs_error = *median_abs_error.last().expect("nonempty");
    Ok(LLNReport {
        checkpoints: checkpoints.to_vec(),
        reference,
        per_seed,
        median_abs_error,
        final_abs_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitStatus {
    Fitted,
    /// Too few distances rose above the noise floor to support a fit.
    Declined,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub steps: Vec<usize>,
    /// Ensemble distance at each step.
    pub distances: Vec<f64>,
    /// Largest distance observed between two equal-law replica ensembles;
    /// distances at or below it are treated as noise.
    pub noise_floor: f64,
    /// Steps whose distances entered the fit.
    pub used_steps: Vec<usize>,
    pub status: FitStatus,
    pub q_hat: Option<f64>,
    pub c_hat: Option<f64>,
    /// Root-mean-square log residual of the fit.
    pub residual: Option<f64>,
    /// Whether the fitted envelope C q^n has a finite sum.
    pub gamma_summable: bool,
}

fn capped(mu: &EmpiricalMeasure, cap: usize, seed: u64, stream: u64) -> Result<EmpiricalMeasure> {
    if mu.n_atoms() <= cap {
        Ok(mu.clone())
    } else {
        subsample(mu, cap, &mut stream_rng(seed, stream))
    }
}

/// Fits D_n = C q^n to the distances between two ensembles evolved from
/// mu_a and mu_b. Ensembles take generator seeds seed and seed + 1; two
/// replica ensembles from mu_a (seeds + 2 and + 3) set the noise floor.
/// The fit reads the prefix of steps before the first distance at or
/// below the floor, minus any step saturating the metric cap. Fewer than
/// two usable steps declines the fit.
#[allow(clippy::too_many_arguments)]
pub fn rate_fit(
    spec: &SystemSpec,
    mu_a: &EmpiricalMeasure,
    mu_b: &EmpiricalMeasure,
    n_max: usize,
    ensemble: usize,
    fm_cap: usize,
    seed: u64,
) -> Result<RateFit> {
    if ensemble < 1000 {
        return Err(Error::Config(format!("rate fit needs ensemble >= 1000, got {ensemble}")));
    }
    if fm_cap == 0 || 2 * fm_cap > SUPPORT_CAP {
        return Err(Error::Config(format!(
            "fm_cap must lie in 1..={}, got {fm_cap}",
            SUPPORT_CAP / 2
        )));
    }
    if n_max == 0 {
        return Err(Error::Config("rate fit needs n_max >= 1".into()));
    }
    let ens_a = sample_ensemble(spec, &EnsembleInit::Measure(mu_a.clone()), n_max, ensemble, seed)?;
    let ens_b =
        sample_ensemble(spec, &EnsembleInit::Measure(mu_b.clone()), n_max, ensemble, seed + 1)?;
    let rep_a =
        sample_ensemble(spec, &EnsembleInit::Measure(mu_a.clone()), n_max, ensemble, seed + 2)?;
    let rep_b =
        sample_ensemble(spec, &EnsembleInit::Measure(mu_a.clone()), n_max, ensemble, seed + 3)?;

    let mut distances = Vec::with_capacity(n_max + 1);
    let mut noise_floor = 0.0f64;
    for m in 0..=n_max {
        let a = capped(&ens_a[m], fm_cap, seed + 4, m as u64)?;
        let b = capped(&ens_b[m], fm_cap, seed + 5, m as u64)?;
        distances.push(fm_distance(&a, &b)?.value);
        let ra = capped(&rep_a[m], fm_cap, seed + 6, m as u64)?;
        let rb = capped(&rep_b[m], fm_cap, seed + 7, m as u64)?;
        noise_floor = noise_floor.max(fm_distance(&ra, &rb)?.value);
    }

    // once a distance falls to the floor the decay is spent; later steps are
    // noise wandering above and below it and must not flatten the slope
    let cutoff = (0..=n_max).find(|&m| distances[m] <= noise_floor).unwrap_or(n_max + 1);
    let used_steps: Vec<usize> = (0..cutoff).filter(|&m| distances[m] < 2.0 - 1e-9).collect();
    let steps: Vec<usize> = (0..=n_max).collect();
    if used_steps.len() < 2 {
        return Ok(RateFit {
            steps,
            distances,
            noise_floor,
            used_steps,
            status: FitStatus::Declined,
            q_hat: None,
            c_hat: None,
            residual: None,
            gamma_summable: false,
        });
    }
    let pts: Vec<(f64, f64)> =
        used_steps.iter().map(|&m| (m as f64, distances[m].ln())).collect();
    let (slope, intercept) = least_squares(&pts).expect("used steps are distinct");
    let rss: f64 =
        pts.iter().map(|&(x, y)| (y - (slope * x + intercept)).powi(2)).sum::<f64>();
    let q_hat = slope.exp();
    Ok(RateFit {
        steps,
        distances,
        noise_floor,
        used_steps,
        status: FitStatus::Fitted,
        q_hat: Some(q_hat),
        c_hat: Some(intercept.exp()),
        residual: Some((rss / pts.len() as f64).sqrt()),
        gamma_summable: q_hat < 1.0,
    })
}
