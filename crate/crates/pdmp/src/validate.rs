//! Sampled validation of a system against its definitional contracts.
//!
//! Flows and probability laws are opaque callables, so the contracts are
//! checked on randomly drawn probe points rather than symbolically. Probes
//! are drawn from the cube of radius `bounded_hint` (default 3) around the
//! origin, probe times from the jump-time law. Each check reports its
//! worst-case residual; the report fails iff some residual exceeds the
//! check's tolerance.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Provenance, SystemSpec};
use crate::rng::{exponential_time, stream_rng, UniformSource};
use crate::space::{hybrid_distance, HybridState};

/// Probe radius used when the space declares no bounded hint.
pub const DEFAULT_PROBE_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst violation observed across all probes, in the check's own scale.
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn from_residual(name: &'static str, residual: f64, tolerance: f64) -> Self {
        CheckResult { name, passed: residual <= tolerance, residual, tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub n_probe: usize,
    pub seed: u64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the sampled checks: flow identity at time zero, flow semigroup
/// property, probability normalization of all three switching laws, metric
/// axioms of the hybrid distance, and (for systems carrying an analytic
/// constants certificate) the averaged expansion and contraction bounds the
/// certificate declares.
///
/// Each check consumes its own derived random stream, so reports are
/// reproducible per (seed, check) independently of check order.
pub fn validate_system(spec: &SystemSpec, n_probe: usize, seed: u64) -> Result<ValidationReport> {
    if n_probe < 1 {
        return Err(Error::Config("n_probe must be at least 1".into()));
    }
    spec.check_structure()?;
    let mut checks = vec![
        check_flow_identity(spec, n_probe, seed),
        check_semigroup(spec, n_probe, seed),
        check_row_sums(spec, n_probe, seed),
        check_metric_axioms(spec, n_probe, seed),
    ];
    if let Some(constants) = &spec.constants {
        if constants.provenance == Provenance::Analytic {
            checks.push(check_certificate(spec, n_probe, seed));
        }
    }
    Ok(ValidationReport { checks, n_probe, seed })
}

fn probe_radius(spec: &SystemSpec) -> f64 {
    spec.space.bounded_hint.unwrap_or(DEFAULT_PROBE_RADIUS)
}

fn draw_point(spec: &SystemSpec, radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..spec.space.dimension).map(|_| (rng.uniform() * 2.0 - 1.0) * radius).collect()
}

fn draw_index(n: usize, rng: &mut ChaCha8Rng) -> usize {
    ((rng.uniform() * n as f64) as usize).min(n - 1)
}

fn origin_distance(spec: &SystemSpec, x: &[f64]) -> f64 {
    let zero = vec![0.0; spec.space.dimension];
    spec.space.distance(x, &zero)
}

/// Every flow must fix its argument at t = 0 (up to affine rounding dust).
fn check_flow_identity(spec: &SystemSpec, n_probe: usize, seed: u64) -> CheckResult {
    let radius = probe_radius(spec);
    let mut rng = stream_rng(seed, 1);
    let mut worst = 0.0_f64;
    for _ in 0..n_probe {
        let x = draw_point(spec, radius, &mut rng);
        for flow in &spec.flows {
            let y = flow.evaluate(0.0, &x);
            let scale = 1.0 + origin_distance(spec, &x);
            worst = worst.max(relative(spec.space.distance(&x, &y), scale));
        }
    }
    CheckResult::from_residual("semiflow-identity", worst, 1e-9)
}

/// Flowing s + t seconds must agree with flowing t then s. Closed forms
/// satisfy this to rounding; numerically integrated flows only to their
/// integration error, hence the loose shared tolerance.
fn check_semigroup(spec: &SystemSpec, n_probe: usize, seed: u64) -> CheckResult {
    let radius = probe_radius(spec);
    let mut rng = stream_rng(seed, 2);
    let mut worst = 0.0_f64;
    for _ in 0..n_probe {
        let x = draw_point(spec, radius, &mut rng);
        let s = exponential_time(spec.lambda, &mut rng);
        let t = exponential_time(spec.lambda, &mut rng);
        for flow in &spec.flows {
            let direct = flow.evaluate(s + t, &x);
            let via = flow.evaluate(s, &flow.evaluate(t, &x));
            let scale = 1.0 + origin_distance(spec, &x) + origin_distance(spec, &direct);
            worst = worst.max(relative(spec.space.distance(&direct, &via), scale));
        }
    }
    CheckResult::from_residual("semigroup", worst, 1e-7)
}

/// All three switching laws must be probability vectors at every probe.
fn check_row_sums(spec: &SystemSpec, n_probe: usize, seed: u64) -> CheckResult {
    let mut rng = stream_rng(seed, 3);
    let radius = probe_radius(spec);
    let mut worst = 0.0_f64;
    for _ in 0..n_probe {
        let x = draw_point(spec, radius, &mut rng);
        worst = worst.max(vector_residual(&spec.probs.initial_flow.evaluate(&x)));
        for row in spec.probs.flow_matrix.evaluate(&x) {
            worst = worst.max(vector_residual(&row));
        }
        worst = worst.max(vector_residual(&spec.probs.jump_dist.evaluate(&x)));
    }
    CheckResult::from_residual("probability-row-sums", worst, 1e-9)
}

fn vector_residual(v: &[f64]) -> f64 {
    let mut residual = 0.0_f64;
    let mut sum = 0.0;
    for &p in v {
        if !p.is_finite() {
            return f64::INFINITY;
        }
        residual = residual.max(-p).max(p - 1.0);
        sum += p;
    }
    residual.max((sum - 1.0).abs())
}

/// The hybrid distance must behave as a metric on random state triples.
fn check_metric_axioms(spec: &SystemSpec, n_probe: usize, seed: u64) -> CheckResult {
    let mut rng = stream_rng(seed, 4);
    let radius = probe_radius(spec);
    let n = spec.n_flows();
    let mut worst = 0.0_f64;
    for _ in 0..n_probe {
        let a = HybridState::new(draw_point(spec, radius, &mut rng), draw_index(n, &mut rng));
        let b = HybridState::new(draw_point(spec, radius, &mut rng), draw_index(n, &mut rng));
        let c = HybridState::new(draw_point(spec, radius, &mut rng), draw_index(n, &mut rng));
        let ab = hybrid_distance(&a, &b, &spec.space);
        let ba = hybrid_distance(&b, &a, &spec.space);
        let ac = hybrid_distance(&a, &c, &spec.space);
        let bc = hybrid_distance(&b, &c, &spec.space);
        worst = worst
            .max(hybrid_distance(&a, &a, &spec.space).abs())
            .max((ab - ba).abs())
            .max(-ab)
            .max(ac - ab - bc);
    }
    CheckResult::from_residual("metric-axioms", worst, 1e-9)
}

/// Certificate claims sampled on probe pairs: the switch-averaged flow
/// expansion must stay within flow_lip * e^{flow_rate * t}, the jump-law
/// averaged image contraction within jump_lip, and the scalar fields must
/// satisfy their range constraints (rate below the jump intensity, overlap
/// bounds in (0, 1], flow_lip at least 1).
fn check_certificate(spec: &SystemSpec, n_probe: usize, seed: u64) -> CheckResult {
    let constants = spec.constants.as_ref().expect("caller checked presence");
    let mut worst = 0.0_f64;
    if !(constants.flow_lip >= 1.0) {
        worst = f64::INFINITY;
    }
    if !(spec.lambda > constants.flow_rate) {
        worst = f64::INFINITY;
    }
    for overlap in [constants.switch_overlap, constants.jump_overlap] {
        if !(overlap > 0.0 && overlap <= 1.0) {
            worst = f64::INFINITY;
        }
    }
    if constants.anchor.len() != spec.space.dimension {
        worst = f64::INFINITY;
    }
    if worst.is_infinite() {
        return CheckResult::from_residual("constants-certificate", worst, 1e-9);
    }

    let mut rng = stream_rng(seed, 5);
    let radius = probe_radius(spec);
    for _ in 0..n_probe {
        let x = draw_point(spec, radius, &mut rng);
        let y = draw_point(spec, radius, &mut rng);
        let rho = spec.space.distance(&x, &y);
        // at nearly coincident pairs the ratio is dominated by evaluation
        // rounding, not by the certificate's claim
        if rho < 1e-9 * radius {
            continue;
        }
        let t = exponential_time(spec.lambda, &mut rng);

        let flown_x: Vec<Vec<f64>> = spec.flows.iter().map(|f| f.evaluate(t, &x)).collect();
        let flown_y: Vec<Vec<f64>> = spec.flows.iter().map(|f| f.evaluate(t, &y)).collect();
        let rows = spec.probs.flow_matrix.evaluate(&y);
        let flow_rhs = constants.flow_lip * (constants.flow_rate * t).exp() * rho;
        for row in rows {
            let lhs: f64 = row
                .iter()
                .zip(flown_x.iter().zip(&flown_y))
                .map(|(p, (fx, fy))| p * spec.space.distance(fx, fy))
                .sum();
            worst = worst.max(lhs / flow_rhs - 1.0);
        }

        let jump_law = spec.probs.jump_dist.evaluate(&x);
        let lhs: f64 = jump_law
            .iter()
            .zip(&spec.jumps)
            .map(|(p, q)| p * spec.space.distance(&q.apply(&x), &q.apply(&y)))
            .sum();
        if constants.jump_lip == 0.0 {
            if lhs > 0.0 {
                worst = f64::INFINITY;
            }
        } else {
            worst = worst.max(lhs / (constants.jump_lip * rho) - 1.0);
        }
    }
    CheckResult::from_residual("constants-certificate", worst, 1e-9)
}

fn relative(value: f64, scale: f64) -> f64 {
    if value.is_finite() {
        value / scale
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{
        JumpMap, ProbMatrix, ProbVec, Semiflow, SwitchLaws, SystemSpec,
    };
    use crate::models;
    use crate::space::StateSpace;

    #[test]
    fn builtin_models_pass_at_large_probe_count() {
        for name in models::REGISTRY {
            let spec = models::by_name(name, 1.0).unwrap();
            let report = validate_system(&spec, 10_000, 7).unwrap();
            assert!(report.passed(), "{name}: {:?}", report.checks);
            assert!(report.checks.iter().any(|c| c.name == "constants-certificate"));
        }
    }

    #[test]
    fn deficient_row_mass_is_reported_with_its_gap() {
        let mut spec = models::linear1d(1.0, 1.0);
        spec.probs.flow_matrix = ProbMatrix::Constant(vec![vec![0.9]]);
        let report = validate_system(&spec, 100, 7).unwrap();
        let check = report.checks.iter().find(|c| c.name == "probability-row-sums").unwrap();
        assert!(!check.passed);
        assert!((check.residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn quadratic_time_dependence_breaks_the_semigroup_check() {
        let mut spec = models::linear1d(1.0, 1.0);
        spec.flows[0] = Semiflow::Custom(Arc::new(|t, x: &[f64]| vec![x[0] + t * t]));
        spec.constants = None;
        let report = validate_system(&spec, 100, 7).unwrap();
        let check = report.checks.iter().find(|c| c.name == "semigroup").unwrap();
        assert!(!check.passed);
        let identity = report.checks.iter().find(|c| c.name == "semiflow-identity").unwrap();
        assert!(identity.passed);
    }

    #[test]
    fn misdeclared_certificate_fails() {
        let mut spec = models::linear1d(1.0, 1.0);
        let mut constants = spec.constants.clone().unwrap();
        constants.jump_lip = 0.4;
        spec.constants = Some(constants);
        let report = validate_system(&spec, 200, 7).unwrap();
        let check = report.checks.iter().find(|c| c.name == "constants-certificate").unwrap();
        assert!(!check.passed);
        // true averaged jump contraction is 0.5, declared 0.4
        assert!((check.residual - 0.25).abs() < 1e-9);
    }

    #[test]
    fn estimated_constants_skip_the_certificate_row() {
        let mut spec = models::linear1d(1.0, 1.0);
        let mut constants = spec.constants.clone().unwrap();
        constants.provenance = Provenance::Estimated;
        spec.constants = Some(constants);
        let report = validate_system(&spec, 50, 7).unwrap();
        assert!(report.checks.iter().all(|c| c.name != "constants-certificate"));
    }

    #[test]
    fn structural_defects_surface_as_config_errors() {
        let spec = models::linear1d(1.0, 1.0);
        assert!(matches!(validate_system(&spec, 0, 7), Err(Error::Config(_))));

        let broken = SystemSpec {
            space: StateSpace::euclidean(1),
            flows: vec![Semiflow::Translate { velocity: vec![1.0] }],
            jumps: vec![JumpMap::Affine { scale: vec![0.5], shift: vec![0.0] }],
            probs: SwitchLaws {
                initial_flow: ProbVec::Constant(vec![1.0]),
                flow_matrix: ProbMatrix::Constant(vec![vec![1.0]]),
                jump_dist: ProbVec::Constant(vec![1.0]),
            },
            lambda: -1.0,
            constants: None,
            name: None,
        };
        assert!(matches!(validate_system(&broken, 10, 7), Err(Error::Config(_))));
    }

    #[test]
    fn rate_at_or_above_intensity_fails_the_certificate() {
        let mut spec = models::linear1d(0.5, 1.0);
        let mut constants = spec.constants.clone().unwrap();
        constants.flow_rate = 0.5;
        spec.constants = Some(constants);
        let report = validate_system(&spec, 10, 7).unwrap();
        let check = report.checks.iter().find(|c| c.name == "constants-certificate").unwrap();
        assert!(!check.passed);
    }
}
