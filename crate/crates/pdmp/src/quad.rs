//! Quadrature rules for integrals against the exponential jump-time weight.
//!
//! Every integral taken here has the form
//! int_0^inf lambda e^{-lambda t} g(t) dt. Two discretizations are
//! provided: Gauss-Laguerre after the substitution u = lambda t (exact for
//! polynomial g up to degree 2n-1, the default), and truncated composite
//! Simpson for integrands that are only piecewise smooth. Both return
//! weights normalized to total mass exactly one, so integrating g = 1 is
//! exact by construction.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadMethod {
    GaussLaguerre,
    TruncatedComposite,
}

/// Discretization choice for exponential-weight integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    pub nodes: usize,
    /// Upper integration limit for the composite rule, in seconds; defaults
    /// to 40 / lambda. Ignored by Gauss-Laguerre.
    pub truncation: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { method: QuadMethod::GaussLaguerre, nodes: 64, truncation: None }
    }
}

impl QuadratureSpec {
    pub fn gauss_laguerre(nodes: usize) -> Self {
        QuadratureSpec { method: QuadMethod::GaussLaguerre, nodes, truncation: None }
    }

    pub fn composite(nodes: usize, truncation: Option<f64>) -> Self {
        QuadratureSpec { method: QuadMethod::TruncatedComposite, nodes, truncation }
    }

    /// Nodes (seconds) and weights such that
    /// int_0^inf lambda e^{-lambda t} g(t) dt ~ sum_i w_i g(t_i), with
    /// sum_i w_i = 1 exactly.
    pub fn rule(&self, lambda: f64) -> Result<Vec<(f64, f64)>> {
        if self.nodes < 2 {
            return Err(Error::Config(format!("quadrature nodes must be >= 2, got {}", self.nodes)));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("quadrature lambda must be positive, got {lambda}")));
        }
        match self.method {
            QuadMethod::GaussLaguerre => {
                let base = laguerre_cached(self.nodes)?;
                Ok(base.iter().map(|&(u, w)| (u / lambda, w)).collect())
            }
            QuadMethod::TruncatedComposite => {
                let t_max = match self.truncation {
                    Some(t) if t > 0.0 && t.is_finite() => t,
                    Some(t) => {
                        return Err(Error::Config(format!(
                            "quadrature truncation must be positive, got {t}"
                        )))
                    }
                    None => 40.0 / lambda,
                };
                Ok(simpson_rule(self.nodes, t_max, lambda))
            }
        }
    }

    /// Applies the rule to an integrand, rejecting non-finite values.
    pub fn integrate(&self, lambda: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        let rule = self.rule(lambda)?;
        let mut total = 0.0;
        for (t, w) in rule {
            let v = g(t);
            if !v.is_finite() {
                return Err(Error::Numeric(format!("integrand returned {v} at t = {t}")));
            }
            total += w * v;
        }
        Ok(total)
    }
}

/// Gauss-Laguerre nodes and weights for int_0^inf e^{-u} h(u) du, via the
/// symmetric Jacobi matrix of the Laguerre recurrence (diagonal 2k+1,
/// off-diagonal k+1) whose eigenvalues are the nodes and whose first
/// eigenvector components squared are the weights. Weights are renormalized
/// to unit mass to absorb eigensolver rounding.
fn laguerre_nodes(n: usize) -> Result<Vec<(f64, f64)>> {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = (2 * k + 1) as f64;
        if k + 1 < n {
            jacobi[(k, k + 1)] = (k + 1) as f64;
            jacobi[(k + 1, k)] = (k + 1) as f64;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let first = eig.eigenvectors[(0, i)];
            (node, first * first)
        })
        .collect();
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mass: f64 = rule.iter().map(|&(_, w)| w).sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::Numeric(format!("degenerate quadrature weight mass {mass}")));
    }
    for pair in &mut rule {
        pair.1 /= mass;
    }
    Ok(rule)
}

fn laguerre_cached(n: usize) -> Result<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Vec<(f64, f64)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(rule) = guard.get(&n) {
        return Ok(rule.clone());
    }
    let rule = laguerre_nodes(n)?;
    guard.insert(n, rule.clone());
    Ok(rule)
}

/// Composite Simpson on [0, t_max] with the weight folded into the node
/// weights and the total renormalized to one (the renormalization also
/// accounts for the truncated tail mass e^{-lambda t_max}). The node count
/// is rounded up to the next odd number when even.
fn simpson_rule(nodes: usize, t_max: f64, lambda: f64) -> Vec<(f64, f64)> {
    let n = if nodes % 2 == 0 { nodes + 1 } else { nodes };
    let h = t_max / (n - 1) as f64;
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = i as f64 * h;
            let simpson = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (t, simpson * lambda * (-lambda * t).exp())
        })
        .collect();
    let mass: f64 = rule.iter().map(|&(_, w)| w).sum();
    for pair in &mut rule {
        pair.1 /= mass;
    }
    rule
}
