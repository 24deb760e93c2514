//! Named observables with declared bounds. Averaging against the
//! bounded-Lipschitz distance class only means something when sup and
//! Lipschitz bounds are known, so observables are picked from this
//! registry rather than parsed from expressions.

use pdmp::space::HybridState;
use serde::Serialize;

use crate::CliError;

pub struct Observable {
    pub f: Box<dyn Fn(&HybridState) -> f64 + Sync>,
    pub meta: ObservableMeta,
}

#[derive(Serialize, Clone, Debug)]
pub struct ObservableMeta {
    pub spec: String,
    /// Supremum bound; None when unbounded.
    pub sup: Option<f64>,
    /// Lipschitz bound in the position coordinates.
    pub lip: f64,
}

/// Forms: `one`, `coord:k`, `min:k:c`, `clip:k:lo:hi`, `gauss:k:mu:sigma`,
/// with k < dimension.
pub fn parse(text: &str, dimension: usize) -> Result<Observable, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = |why: String| {
        CliError::Config(format!(
            "observable '{text}': {why}; forms are one, coord:k, min:k:c, clip:k:lo:hi, gauss:k:mu:sigma"
        ))
    };
    let index = |s: &str| -> Result<usize, CliError> {
        let k = s.parse::<usize>().map_err(|_| bad("bad coordinate index".into()))?;
        if k >= dimension {
            return Err(bad(format!("coordinate {k} of a {dimension}-dimensional model")));
        }
        Ok(k)
    };
    let real = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad("bad numeric parameter".into()))
    };

    let meta = |sup: Option<f64>, lip: f64| ObservableMeta { spec: text.to_string(), sup, lip };
    match parts.as_slice() {
        ["one"] => Ok(Observable { f: Box::new(|_| 1.0), meta: meta(Some(1.0), 0.0) }),
        ["coord", k] => {
            let k = index(k)?;
            Ok(Observable {
                f: Box::new(move |s: &HybridState| s.x[k]),
                meta: meta(None, 1.0),
            })
        }
        ["min", k, c] => {
            let (k, c) = (index(k)?, real(c)?);
            Ok(Observable {
                f: Box::new(move |s: &HybridState| s.x[k].min(c)),
                meta: meta(None, 1.0),
            })
        }
        ["clip", k, lo, hi] => {
            let (k, lo, hi) = (index(k)?, real(lo)?, real(hi)?);
            if lo > hi {
                return Err(bad("clip needs lo <= hi".into()));
            }
            Ok(Observable {
                f: Box::new(move |s: &HybridState| s.x[k].clamp(lo, hi)),
                meta: meta(Some(lo.abs().max(hi.abs())), 1.0),
            })
        }
        ["gauss", k, mu, sigma] => {
            let (k, mu, sigma) = (index(k)?, real(mu)?, real(sigma)?);
            if sigma <= 0.0 {
                return Err(bad("gauss needs sigma > 0".into()));
            }
            Ok(Observable {
                f: Box::new(move |s: &HybridState| {
                    (-0.5 * ((s.x[k] - mu) / sigma).powi(2)).exp()
                }),
                // steepest at one sigma out
                meta: meta(Some(1.0), (-0.5f64).exp() / sigma),
            })
        }
        _ => Err(bad("unknown form".into())),
    }
}
