//! Built-in example systems and the JSON model loader.
//!
//! Each constructor returns a fully specified system with an analytic
//! constants certificate attached. `by_name` resolves the registry names
//! used by the command line; `from_json` additionally accepts structured
//! descriptions of affine systems with constant switching laws.

use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    JumpMap, ModelConstants, ProbMatrix, ProbVec, Provenance, Semiflow, SwitchLaws, SystemSpec,
};
use crate::space::{Metric, StateSpace};

/// Scalar system with one flow x(t) = e^{-t} x and one jump x -> x/2 + c.
///
/// Every switching law is deterministic, so the position chain is an
/// autonomous stochastic recursion with closed-form stationary moments;
/// the tests use it whenever an exact reference value is needed.
pub fn linear1d(lambda: f64, c: f64) -> SystemSpec {
    assert!(c.is_finite(), "linear1d jump offset must be finite, got {c}");
    let probs = SwitchLaws {
        initial_flow: ProbVec::Constant(vec![1.0]),
        flow_matrix: ProbMatrix::Constant(vec![vec![1.0]]),
        jump_dist: ProbVec::Constant(vec![1.0]),
    };
    let spec = SystemSpec::new(
        StateSpace::euclidean(1),
        vec![Semiflow::AffineExp { rate: vec![-1.0], target: vec![0.0] }],
        vec![JumpMap::Affine { scale: vec![0.5], shift: vec![c] }],
        probs,
        lambda,
    )
    .expect("fixed structure is valid");
    spec.with_constants(ModelConstants {
        flow_lip: 1.0,
        flow_rate: -1.0,
        jump_lip: 0.5,
        switch_lip: 0.0,
        jump_prob_lip: 0.0,
        switch_overlap: 1.0,
        jump_overlap: 1.0,
        anchor: vec![0.0],
        provenance: Provenance::Analytic,
    })
    .with_name("linear1d")
}

fn toggle_weights(x: &[f64]) -> Vec<f64> {
    let w = 0.25 + 0.5 * x[0].clamp(0.0, 1.0);
    vec![w, 1.0 - w]
}

/// Scalar two-flow system modeled on a self-regulating switch: one flow
/// relaxes toward 0, the other toward 1, and a position-dependent weight
/// w(x) = 1/4 + clamp(x, 0, 1)/2 favors the flow matching the current
/// level. Jumps contract toward the target of the same index. The same
/// weight vector serves as initial law, both switch rows, and jump law.
///
/// With the weight capped inside [1/4, 3/4], every law overlap is at least
/// 1/16 and the row-sum Lipschitz bounds equal one with equality on [0, 1].
pub fn genetoggle(lambda: f64) -> SystemSpec {
    let weights: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync> = Arc::new(toggle_weights);
    let rows = {
        let weights = weights.clone();
        Arc::new(move |x: &[f64]| {
            let row = weights(x);
            vec![row.clone(), row]
        })
    };
    let probs = SwitchLaws {
        initial_flow: ProbVec::Custom { len: 2, f: weights.clone() },
        flow_matrix: ProbMatrix::Custom { rows: 2, f: rows },
        jump_dist: ProbVec::Custom { len: 2, f: weights },
    };
    let spec = SystemSpec::new(
        StateSpace::euclidean(1).with_hint(2.0),
        vec![
            Semiflow::AffineExp { rate: vec![-1.0], target: vec![0.0] },
            Semiflow::AffineExp { rate: vec![-1.0], target: vec![1.0] },
        ],
        vec![
            JumpMap::Affine { scale: vec![0.5], shift: vec![0.0] },
            JumpMap::Affine { scale: vec![0.5], shift: vec![0.5] },
        ],
        probs,
        lambda,
    )
    .expect("fixed structure is valid");
    spec.with_constants(ModelConstants {
        flow_lip: 1.0,
        flow_rate: -1.0,
        jump_lip: 0.5,
        switch_lip: 1.0,
        jump_prob_lip: 1.0,
        switch_overlap: 1.0 / 16.0,
        jump_overlap: 1.0 / 16.0,
        anchor: vec![0.0],
        provenance: Provenance::Analytic,
    })
    .with_name("genetoggle")
}

/// Degenerate system whose single jump map sends everything to the point 1:
/// after the first jump the chain is deterministic. Exercises the zero
/// jump-contraction edge of the condition checkers and couplers.
pub fn constjump(lambda: f64) -> SystemSpec {
    let probs = SwitchLaws {
        initial_flow: ProbVec::Constant(vec![1.0]),
        flow_matrix: ProbMatrix::Constant(vec![vec![1.0]]),
        jump_dist: ProbVec::Constant(vec![1.0]),
    };
    let spec = SystemSpec::new(
        StateSpace::euclidean(1),
        vec![Semiflow::AffineExp { rate: vec![-1.0], target: vec![0.0] }],
        vec![JumpMap::Constant { point: vec![1.0] }],
        probs,
        lambda,
    )
    .expect("fixed structure is valid");
    spec.with_constants(ModelConstants {
        flow_lip: 1.0,
        flow_rate: -1.0,
        jump_lip: 0.0,
        switch_lip: 0.0,
        jump_prob_lip: 0.0,
        switch_overlap: 1.0,
        jump_overlap: 1.0,
        anchor: vec![1.0],
        provenance: Provenance::Analytic,
    })
    .with_name("constjump")
}

/// Scalar system whose flow is the isometry x + t and whose jump halves the
/// position. The flow neither contracts nor expands (zero average rate), so
/// all contraction comes from the jumps; exercises the zero-rate branches
/// of the time-window diagnostics.
pub fn translation1d(lambda: f64) -> SystemSpec {
    let probs = SwitchLaws {
        initial_flow: ProbVec::Constant(vec![1.0]),
        flow_matrix: ProbMatrix::Constant(vec![vec![1.0]]),
        jump_dist: ProbVec::Constant(vec![1.0]),
    };
    let spec = SystemSpec::new(
        StateSpace::euclidean(1),
        vec![Semiflow::Translate { velocity: vec![1.0] }],
        vec![JumpMap::Affine { scale: vec![0.5], shift: vec![0.0] }],
        probs,
        lambda,
    )
    .expect("fixed structure is valid");
    spec.with_constants(ModelConstants {
        flow_lip: 1.0,
        flow_rate: 0.0,
        jump_lip: 0.5,
        switch_lip: 0.0,
        jump_prob_lip: 0.0,
        switch_overlap: 1.0,
        jump_overlap: 1.0,
        anchor: vec![0.0],
        provenance: Provenance::Analytic,
    })
    .with_name("translation1d")
}

pub const REGISTRY: [&str; 4] = ["linear1d", "genetoggle", "constjump", "translation1d"];

/// Resolves a registry name. `linear1d` uses jump offset 1.
pub fn by_name(name: &str, lambda: f64) -> Result<SystemSpec> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be positive and finite, got {lambda}")));
    }
    match name {
        "linear1d" => Ok(linear1d(lambda, 1.0)),
        "genetoggle" => Ok(genetoggle(lambda)),
        "constjump" => Ok(constjump(lambda)),
        "translation1d" => Ok(translation1d(lambda)),
        other => Err(Error::Config(format!(
            "unknown model '{other}'; known models: {}",
            REGISTRY.join(", ")
        ))),
    }
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum FlowDesc {
    AffineExp { rate: Vec<f64>, target: Vec<f64> },
    Translate { velocity: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum JumpDesc {
    Affine { scale: Vec<f64>, shift: Vec<f64> },
    Constant { point: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    /// Registry name; when present no structural fields may appear.
    #[serde(default)]
    builtin: Option<String>,
    lambda: f64,
    #[serde(default)]
    dimension: Option<usize>,
    #[serde(default)]
    metric: Option<Metric>,
    #[serde(default)]
    bounded_hint: Option<f64>,
    #[serde(default)]
    flows: Vec<FlowDesc>,
    #[serde(default)]
    jumps: Vec<JumpDesc>,
    #[serde(default)]
    initial_flow: Option<Vec<f64>>,
    #[serde(default)]
    flow_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    jump_dist: Option<Vec<f64>>,
    #[serde(default)]
    constants: Option<ModelConstants>,
    #[serde(default)]
    name: Option<String>,
}

/// Builds a system from its JSON description.
///
/// Two forms are accepted: `{"builtin": "<registry name>", "lambda": ...}`,
/// and a structured form giving the dimension, flow and jump descriptors
/// (affine families only), and constant switching laws, with optional
/// metric, bounded hint, constants certificate, and display name.
pub fn from_json(text: &str) -> Result<SystemSpec> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model json: {e}")))?;
    if let Some(name) = &file.builtin {
        if file.dimension.is_some()
            || file.metric.is_some()
            || !file.flows.is_empty()
            || !file.jumps.is_empty()
            || file.initial_flow.is_some()
            || file.flow_matrix.is_some()
            || file.jump_dist.is_some()
        {
            return Err(Error::Config(
                "model json: builtin form takes no structural fields".into(),
            ));
        }
        return by_name(name, file.lambda);
    }

    let dimension = file
        .dimension
        .ok_or_else(|| Error::Config("model json: dimension required".into()))?;
    let metric = file.metric.unwrap_or(Metric::Euclidean);
    let space = StateSpace { dimension, metric, bounded_hint: file.bounded_hint };

    let check_len = |len: usize, what: &str| -> Result<()> {
        if len != dimension {
            return Err(Error::Config(format!(
                "model json: {what} has {len} coordinates, expected {dimension}"
            )));
        }
        Ok(())
    };
    let mut flows = Vec::with_capacity(file.flows.len());
    for desc in &file.flows {
        flows.push(match desc {
            FlowDesc::AffineExp { rate, target } => {
                check_len(rate.len(), "flow rate")?;
                check_len(target.len(), "flow target")?;
                Semiflow::AffineExp { rate: rate.clone(), target: target.clone() }
            }
            FlowDesc::Translate { velocity } => {
                check_len(velocity.len(), "flow velocity")?;
                Semiflow::Translate { velocity: velocity.clone() }
            }
        });
    }
    let mut jumps = Vec::with_capacity(file.jumps.len());
    for desc in &file.jumps {
        jumps.push(match desc {
            JumpDesc::Affine { scale, shift } => {
                check_len(scale.len(), "jump scale")?;
                check_len(shift.len(), "jump shift")?;
                JumpMap::Affine { scale: scale.clone(), shift: shift.clone() }
            }
            JumpDesc::Constant { point } => {
                check_len(point.len(), "jump point")?;
                JumpMap::Constant { point: point.clone() }
            }
        });
    }

    let initial_flow = file
        .initial_flow
        .ok_or_else(|| Error::Config("model json: initial_flow required".into()))?;
    let flow_matrix = file
        .flow_matrix
        .ok_or_else(|| Error::Config("model json: flow_matrix required".into()))?;
    let jump_dist = file
        .jump_dist
        .ok_or_else(|| Error::Config("model json: jump_dist required".into()))?;
    let probs = SwitchLaws {
        initial_flow: ProbVec::Constant(initial_flow),
        flow_matrix: ProbMatrix::Constant(flow_matrix),
        jump_dist: ProbVec::Constant(jump_dist),
    };

    let mut spec = SystemSpec::new(space, flows, jumps, probs, file.lambda)?;
    if let Some(constants) = file.constants {
        spec = spec.with_constants(constants);
    }
    if let Some(name) = file.name {
        spec = spec.with_name(name);
    }
    Ok(spec)
}
