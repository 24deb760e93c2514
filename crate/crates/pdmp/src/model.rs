//! System definitions: flows, jump maps, switching laws, and the constants
//! certificate.
//!
//! A system is a finite family of semiflows and jump maps on a common state
//! space, together with position-dependent switching probabilities and an
//! exponential jump-time intensity. Between jumps the position follows one
//! flow; at a jump it is relocated by one jump map; which flow and which map
//! apply is drawn from the switching laws evaluated at the relevant position.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::StateSpace;

type PointFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type FlowFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// One semiflow: a map (t, x) -> position at time t along the flow started
/// at x, with the semigroup property in t.
#[derive(Clone)]
pub enum Semiflow {
    /// Coordinatewise x_k(t) = c_k + e^{a_k t} (x_k - c_k): exponential
    /// relaxation toward `target` at rate `-rate` (growth for positive rate).
    AffineExp { rate: Vec<f64>, target: Vec<f64> },
    /// Straight-line drift x + v t; an isometry for every t.
    Translate { velocity: Vec<f64> },
    /// Numerical flow of the vector field x' = field(x), integrated with
    /// fixed-step fourth-order Runge-Kutta (final partial step shortened).
    /// Satisfies the semigroup property only up to integration error.
    Rk4 { field: PointFn, step: f64 },
    /// Arbitrary closed-form flow; the caller is responsible for the
    /// semigroup property (validation spot-checks it).
    Custom(FlowFn),
}

impl Semiflow {
    pub fn evaluate(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match self {
            Semiflow::AffineExp { rate, target } => x
                .iter()
                .zip(rate)
                .zip(target)
                .map(|((xk, ak), ck)| ck + (ak * t).exp() * (xk - ck))
                .collect(),
            Semiflow::Translate { velocity } => {
                x.iter().zip(velocity).map(|(xk, vk)| xk + vk * t).collect()
            }
            Semiflow::Rk4 { field, step } => rk4_flow(field, *step, t, x),
            Semiflow::Custom(f) => f(t, x),
        }
    }

    /// True for variants whose semigroup property is exact in exact
    /// arithmetic; Rk4 flows only satisfy it up to O(step^4) per unit time.
    pub fn is_closed_form(&self) -> bool {
        !matches!(self, Semiflow::Rk4 { .. })
    }
}

impl fmt::Debug for Semiflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semiflow::AffineExp { rate, target } => {
                f.debug_struct("AffineExp").field("rate", rate).field("target", target).finish()
            }
            Semiflow::Translate { velocity } => {
                f.debug_struct("Translate").field("velocity", velocity).finish()
            }
            Semiflow::Rk4 { step, .. } => f.debug_struct("Rk4").field("step", step).finish(),
            Semiflow::Custom(_) => f.write_str("Custom"),
        }
    }
}

fn rk4_flow(field: &PointFn, step: f64, t: f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    let mut remaining = t;
    while remaining > 0.0 {
        let h = remaining.min(step);
        y = rk4_step(field, h, &y);
        remaining -= h;
    }
    y
}

fn rk4_step(field: &PointFn, h: f64, y: &[f64]) -> Vec<f64> {
    let k1 = field(y);
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(yk, k)| yk + 0.5 * h * k).collect();
    let k2 = field(&y2);
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(yk, k)| yk + 0.5 * h * k).collect();
    let k3 = field(&y3);
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(yk, k)| yk + h * k).collect();
    let k4 = field(&y4);
    y.iter()
        .enumerate()
        .map(|(k, yk)| yk + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]))
        .collect()
}

/// One jump map: where a jump relocates the position.
#[derive(Clone)]
pub enum JumpMap {
    /// Coordinatewise x_k -> scale_k * x_k + shift_k.
    Affine { scale: Vec<f64>, shift: Vec<f64> },
    /// Every position jumps to the same point.
    Constant { point: Vec<f64> },
    Custom(PointFn),
}

impl JumpMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            JumpMap::Affine { scale, shift } => x
                .iter()
                .zip(scale)
                .zip(shift)
                .map(|((xk, sk), bk)| sk * xk + bk)
                .collect(),
            JumpMap::Constant { point } => point.clone(),
            JumpMap::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for JumpMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpMap::Affine { scale, shift } => {
                f.debug_struct("Affine").field("scale", scale).field("shift", shift).finish()
            }
            JumpMap::Constant { point } => f.debug_struct("Constant").field("point", point).finish(),
            JumpMap::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A position-dependent probability vector.
#[derive(Clone)]
pub enum ProbVec {
    Constant(Vec<f64>),
    Custom { len: usize, f: PointFn },
}

impl ProbVec {
    pub fn len(&self) -> usize {
        match self {
            ProbVec::Constant(v) => v.len(),
            ProbVec::Custom { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ProbVec::Constant(v) => v.clone(),
            ProbVec::Custom { f, .. } => f(x),
        }
    }
}

impl fmt::Debug for ProbVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbVec::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            ProbVec::Custom { len, .. } => f.debug_struct("Custom").field("len", len).finish(),
        }
    }
}

/// A position-dependent probability matrix, row-indexed by the conditioning
/// flow index.
#[derive(Clone)]
pub enum ProbMatrix {
    Constant(Vec<Vec<f64>>),
    Custom { rows: usize, f: MatrixFn },
}

impl ProbMatrix {
    pub fn rows(&self) -> usize {
        match self {
            ProbMatrix::Constant(m) => m.len(),
            ProbMatrix::Custom { rows, .. } => *rows,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            ProbMatrix::Constant(m) => m.clone(),
            ProbMatrix::Custom { f, .. } => f(x),
        }
    }

    pub fn row(&self, x: &[f64], i: usize) -> Vec<f64> {
        match self {
            ProbMatrix::Constant(m) => m[i].clone(),
            ProbMatrix::Custom { f, .. } => {
                let m = f(x);
                m[i].clone()
            }
        }
    }
}

impl fmt::Debug for ProbMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbMatrix::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            ProbMatrix::Custom { rows, .. } => f.debug_struct("Custom").field("rows", rows).finish(),
        }
    }
}

/// The three switching laws of a system.
#[derive(Debug, Clone)]
pub struct SwitchLaws {
    /// Law of the initial flow index given the start position.
    pub initial_flow: ProbVec,
    /// Law of the next segment's flow index, conditioned on the index
    /// associated with the current state and evaluated at its position.
    pub flow_matrix: ProbMatrix,
    /// Law of the jump map index, evaluated at the pre-jump position.
    pub jump_dist: ProbVec,
}

/// Where a constants certificate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Derived by hand from the model's closed form.
    Analytic,
    /// Fitted from sampled probes; a lower-bound candidate, not a certificate.
    Estimated,
}

/// Constants describing how a system contracts on average, used by the
/// condition checkers and the coupling diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    /// Scale factor of the averaged flow-expansion bound: the switch-weighted
    /// sum of distances between the flows of two starts stays within
    /// flow_lip * exp(flow_rate * t) times the starting distance.
    pub flow_lip: f64,
    /// Exponential rate in that bound (1/seconds; negative means the flows
    /// contract on average).
    pub flow_rate: f64,
    /// Averaged contraction factor of the jump maps: the jump-law-weighted
    /// sum of image distances stays within jump_lip times the distance.
    pub jump_lip: f64,
    /// Lipschitz bound for the flow-switch matrix rows in row-sum norm.
    pub switch_lip: f64,
    /// Lipschitz bound for the jump distribution in sum norm.
    pub jump_prob_lip: f64,
    /// Lower bound on the overlap of two switch rows restricted to flow
    /// indices along which the pair contracts.
    pub switch_overlap: f64,
    /// Lower bound on the overlap of two jump distributions restricted to
    /// jump indices under which the pair contracts.
    pub jump_overlap: f64,
    /// Reference point with integrable jump displacement, the center for
    /// drift diagnostics.
    pub anchor: Vec<f64>,
    pub provenance: Provenance,
}

/// A complete system: space, flows, jumps, switching laws, jump intensity.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub space: StateSpace,
    pub flows: Vec<Semiflow>,
    pub jumps: Vec<JumpMap>,
    pub probs: SwitchLaws,
    /// Intensity of the exponential jump-time clock (1/seconds).
    pub lambda: f64,
    pub constants: Option<ModelConstants>,
    /// Registry name, if the system came from the built-in library.
    pub name: Option<String>,
}

impl SystemSpec {
    /// Validates structural requirements; probabilistic and metric
    /// requirements are sampled separately by `validate_system`.
    pub fn new(
        space: StateSpace,
        flows: Vec<Semiflow>,
        jumps: Vec<JumpMap>,
        probs: SwitchLaws,
        lambda: f64,
    ) -> Result<Self> {
        let spec = SystemSpec { space, flows, jumps, probs, lambda, constants: None, name: None };
        spec.check_structure()?;
        Ok(spec)
    }

    /// Structural requirements every system must meet regardless of how it
    /// was assembled (fields are public, so `new` is bypassable).
    pub fn check_structure(&self) -> Result<()> {
        self.space.check()?;
        if self.flows.is_empty() {
            return Err(Error::Config("flows must be non-empty".into()));
        }
        if self.jumps.is_empty() {
            return Err(Error::Config("jumps must be non-empty".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.probs.initial_flow.len() != self.flows.len() {
            return Err(Error::Config(format!(
                "probs.initial_flow length {} does not match flow count {}",
                self.probs.initial_flow.len(),
                self.flows.len()
            )));
        }
        if self.probs.flow_matrix.rows() != self.flows.len() {
            return Err(Error::Config(format!(
                "probs.flow_matrix row count {} does not match flow count {}",
                self.probs.flow_matrix.rows(),
                self.flows.len()
            )));
        }
        if self.probs.jump_dist.len() != self.jumps.len() {
            return Err(Error::Config(format!(
                "probs.jump_dist length {} does not match jump count {}",
                self.probs.jump_dist.len(),
                self.jumps.len()
            )));
        }
        Ok(())
    }

    pub fn with_constants(mut self, constants: ModelConstants) -> Self {
        self.constants = Some(constants);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn n_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn constants(&self) -> Result<&ModelConstants> {
        self.constants
            .as_ref()
            .ok_or_else(|| Error::Config("spec.constants required but absent".into()))
    }
}

/// Evaluates flow `j` of the system for `t` seconds from `x`.
pub fn evaluate_flow(spec: &SystemSpec, j: usize, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    if j >= spec.n_flows() {
        return Err(Error::Domain(format!("flow index {j} out of range 0..{}", spec.n_flows())));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("flow time must be nonnegative, got {t}")));
    }
    Ok(spec.flows[j].evaluate(t, x))
}

/// Checks that `v` is a probability vector: entries in [0, 1] up to rounding
/// dust and total mass 1 within 1e-9.
pub fn check_prob_vec(v: &[f64], context: &str) -> Result<()> {
    let mut sum = 0.0;
    for (k, &p) in v.iter().enumerate() {
        if !p.is_finite() || p < -1e-12 || p > 1.0 + 1e-9 {
            return Err(Error::Probability(format!("{context}: entry {k} = {p} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Probability(format!("{context}: mass {sum} not 1 within 1e-9")));
    }
    Ok(())
}
