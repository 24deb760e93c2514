//! The one-step transition operator: quadrature for its dual action on
//! observables, Monte Carlo for measures and multi-step iteration.
//!
//! The dual action at (x, i) averages f over one transition: holding time
//! under the exponential weight, segment flow from row i at x, jump at the
//! landing point, with the new index equal to the segment flow. Quadrature
//! handles the time integral; the index sums are exact.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::model::{check_prob_vec, evaluate_flow, SystemSpec};
use crate::quad::QuadratureSpec;
use crate::sim::step_chain;
use crate::space::HybridState;

/// Dual-operator action on an observable at one state, by quadrature.
/// Exact in the index sums, quadrature-limited in time.
pub fn apply_dual<F>(
    spec: &SystemSpec,
    f: &F,
    state: &HybridState,
    quad: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(&HybridState) -> f64 + ?Sized,
{
    if state.x.len() != spec.space.dimension || state.flow >= spec.n_flows() {
        return Err(Error::Domain(format!(
            "state ({} coordinates, flow {}) does not fit the system",
            state.x.len(),
            state.flow
        )));
    }
    let rule = quad.rule(spec.lambda)?;
    let row = spec.probs.flow_matrix.row(&state.x, state.flow);
    check_prob_vec(&row, "switch matrix row")?;

    let mut total = 0.0;
    for (j, &pj) in row.iter().enumerate() {
        if pj == 0.0 {
            continue;
        }
        let mut time_integral = 0.0;
        for &(t, w) in &rule {
            let y = evaluate_flow(spec, j, t, &state.x)?;
            let law = spec.probs.jump_dist.evaluate(&y);
            check_prob_vec(&law, "jump law")?;
            let mut jump_avg = 0.0;
            for (s, &ps) in law.iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                let z = spec.jumps[s].apply(&y);
                let value = f(&HybridState::new(z, j));
                if !value.is_finite() {
                    return Err(Error::Numeric(format!(
                        "observable returned {value} under flow {j}, jump {s}, t={t}"
                    )));
                }
                jump_avg += ps * value;
            }
            time_integral += w * jump_avg;
        }
        total += pj * time_integral;
    }
    Ok(total)
}

/// One Monte Carlo step of every atom; weights ride along unchanged, so
/// the total mass is preserved. The measure must carry flow indices.
pub fn push_forward<R: RngCore + ?Sized>(
    spec: &SystemSpec,
    mu: &EmpiricalMeasure,
    rng: &mut R,
) -> Result<EmpiricalMeasure> {
    if !mu.is_hybrid() {
        return Err(Error::Config(
            "push_forward needs a measure with flow indices; draw them from the initial law first"
                .into(),
        ));
    }
    let moved: Vec<(HybridState, f64)> = mu
        .weighted_states()
        .map(|(state, w)| Ok((step_chain(spec, &state, rng)?.0, w)))
        .collect::<Result<_>>()?;
    EmpiricalMeasure::from_hybrid(&spec.space, &moved)
}

/// n-step dual action at one state: exact for n = 0, a Monte Carlo average
/// over `mc_paths` chains otherwise.
pub fn iterate_dual<F, R>(
    spec: &SystemSpec,
    f: &F,
    state: &HybridState,
    n: usize,
    mc_paths: usize,
    rng: &mut R,
) -> Result<f64>
where
    F: Fn(&HybridState) -> f64 + ?Sized,
    R: RngCore + ?Sized,
{
    if n == 0 {
        return Ok(f(state));
    }
    if mc_paths == 0 {
        return Err(Error::Config("iterating the dual needs at least one path".into()));
    }
    let mut acc = 0.0;
    for _ in 0..mc_paths {
        let mut here = state.clone();
        for _ in 0..n {
            here = step_chain(spec, &here, rng)?.0;
        }
        let value = f(&here);
        if !value.is_finite() {
            return Err(Error::Numeric(format!("observable returned {value} after {n} steps")));
        }
        acc += value;
    }
    Ok(acc / mc_paths as f64)
}
