//! State spaces and the hybrid metric.
//!
//! Positions live in a finite-dimensional real vector space with a pluggable
//! metric. Chain states pair a position with the index of the flow that
//! produced it; the hybrid metric adds the discrete metric on indices to the
//! position metric, so two states at the same point but under different flows
//! are at distance one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance function on position vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    /// max_k w_k |a_k - b_k| with positive weights, one per coordinate.
    WeightedMax(Vec<f64>),
}

/// A finite-dimensional position space with its metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub dimension: usize,
    pub metric: Metric,
    /// Optional radius around the origin that sampling diagnostics use to
    /// draw probe points. Purely advisory; no operation restricts states
    /// to this ball.
    pub bounded_hint: Option<f64>,
}

impl StateSpace {
    pub fn euclidean(dimension: usize) -> Self {
        StateSpace { dimension, metric: Metric::Euclidean, bounded_hint: None }
    }

    pub fn with_hint(mut self, radius: f64) -> Self {
        self.bounded_hint = Some(radius);
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("space.dimension must be positive".into()));
        }
        if let Metric::WeightedMax(w) = &self.metric {
            if w.len() != self.dimension {
                return Err(Error::Config(format!(
                    "space.metric weight count {} does not match dimension {}",
                    w.len(),
                    self.dimension
                )));
            }
            if w.iter().any(|&wk| !(wk > 0.0) || !wk.is_finite()) {
                return Err(Error::Config("space.metric weights must be positive and finite".into()));
            }
        }
        Ok(())
    }

    /// Distance between two position vectors of this space's dimension.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match &self.metric {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(ak, bk)| (ak - bk) * (ak - bk))
                .sum::<f64>()
                .sqrt(),
            Metric::WeightedMax(w) => a
                .iter()
                .zip(b)
                .zip(w)
                .map(|((ak, bk), wk)| wk * (ak - bk).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// A chain state: position plus the index of the flow associated with it.
///
/// The index component records which flow drove the segment that ended at
/// `x` (for freshly constructed initial states, the index that the first
/// switch draw will condition on).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub x: Vec<f64>,
    pub flow: usize,
}

impl HybridState {
    pub fn new(x: Vec<f64>, flow: usize) -> Self {
        HybridState { x, flow }
    }
}

/// Distance on hybrid states: position distance plus the discrete metric on
/// flow indices.
pub fn hybrid_distance(a: &HybridState, b: &HybridState, space: &StateSpace) -> f64 {
    let index_part = if a.flow == b.flow { 0.0 } else { 1.0 };
    space.distance(&a.x, &b.x) + index_part
}
