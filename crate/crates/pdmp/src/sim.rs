//! Seeded sampling of the embedded chain, pointwise evaluation of the
//! continuous-time trajectory it encodes, and parallel ensembles.
//!
//! One step from (x, i): an exponential holding time, a segment flow drawn
//! from row i of the switch matrix at x, the flow applied for the holding
//! time, and a jump drawn at the landing point. The new state carries the
//! segment flow, so its index component always records which flow drove
//! the segment that ended at its position. Draw order within a step is
//! fixed (time, flow, jump), one uniform each, which makes every sample a
//! pure function of (seed, stream).

use rayon::prelude::*;
use std::fmt::Write as _;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::model::{evaluate_flow, SystemSpec};
use crate::rng::{categorical, exponential_time, stream_rng, UniformSource};
use crate::space::HybridState;

/// One transition of the embedded chain, with the auxiliary draws kept for
/// replay and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Holding time of the segment.
    pub dt: f64,
    /// Index component of the state the step left; selects the switch row.
    pub prev_flow: usize,
    /// Flow drawn this step; drove the segment and is carried by the new
    /// state.
    pub flow: usize,
    /// Pre-jump point: `flow` applied for `dt` from the previous position,
    /// bitwise.
    pub y: Vec<f64>,
    /// Jump map index drawn at y.
    pub jump: usize,
    /// Post-jump position: jump map `jump` applied to y, bitwise.
    pub x: Vec<f64>,
}

/// A sampled chain: start state, step records, and the cumulative jump
/// times (length one more than `steps`, starting at 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub x0: Vec<f64>,
    pub xi0: usize,
    pub steps: Vec<StepRecord>,
    pub jump_times: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl ChainSample {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// State after m steps; m = 0 is the start state.
    pub fn state_at(&self, m: usize) -> HybridState {
        if m == 0 {
            HybridState::new(self.x0.clone(), self.xi0)
        } else {
            let s = &self.steps[m - 1];
            HybridState::new(s.x.clone(), s.flow)
        }
    }

    pub fn final_state(&self) -> HybridState {
        self.state_at(self.steps.len())
    }

    /// All states in step order, start included.
    pub fn states(&self) -> Vec<HybridState> {
        (0..=self.steps.len()).map(|m| self.state_at(m)).collect()
    }

    /// CSV dump, one row per step: `n,dt,t,xi_prev,eta,y...,x...,xi` with
    /// points expanded per coordinate.
    pub fn to_csv(&self) -> String {
        let d = self.x0.len();
        let mut out = String::from("n,dt,t,xi_prev,eta");
        for k in 0..d {
            let _ = write!(out, ",y{k}");
        }
        for k in 0..d {
            let _ = write!(out, ",x{k}");
        }
        out.push_str(",xi\n");
        for (m, s) in self.steps.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                m + 1,
                s.dt,
                self.jump_times[m + 1],
                s.prev_flow,
                s.jump
            );
            for c in &s.y {
                let _ = write!(out, ",{c}");
            }
            for c in &s.x {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out, ",{}", s.flow);
        }
        out
    }
}

fn check_start(spec: &SystemSpec, x0: &[f64], flow: usize) -> Result<()> {
    if x0.len() != spec.space.dimension {
        return Err(Error::Domain(format!(
            "start point has {} coordinates, space has {}",
            x0.len(),
            spec.space.dimension
        )));
    }
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("start point must be finite".into()));
    }
    if flow >= spec.n_flows() {
        return Err(Error::Domain(format!(
            "flow index {flow} out of range for {} flows",
            spec.n_flows()
        )));
    }
    Ok(())
}

/// Index drawn from the initial-flow law at x0.
pub fn draw_initial_flow<R: RngCore + ?Sized>(
    spec: &SystemSpec,
    x0: &[f64],
    rng: &mut R,
) -> Result<usize> {
    check_start(spec, x0, 0)?;
    let law = spec.probs.initial_flow.evaluate(x0);
    categorical(&law, "initial flow law", rng)
}

/// One transition from `state`, consuming three uniforms in fixed order.
pub fn step_chain<R: RngCore + ?Sized>(
    spec: &SystemSpec,
    state: &HybridState,
    rng: &mut R,
) -> Result<(HybridState, StepRecord)> {
    check_start(spec, &state.x, state.flow)?;
    let dt = exponential_time(spec.lambda, rng);
    let row = spec.probs.flow_matrix.row(&state.x, state.flow);
    let flow = categorical(&row, "switch matrix row", rng)?;
    let y = evaluate_flow(spec, flow, dt, &state.x)?;
    let jump_law = spec.probs.jump_dist.evaluate(&y);
    let jump = categorical(&jump_law, "jump law", rng)?;
    let x = spec.jumps[jump].apply(&y);
    let record = StepRecord { dt, prev_flow: state.flow, flow, y, jump, x: x.clone() };
    Ok((HybridState::new(x, flow), record))
}

/// n steps from (x0, xi0) on the stream's own generator; bitwise
/// deterministic in (seed, stream).
pub fn sample_chain(
    spec: &SystemSpec,
    x0: &[f64],
    xi0: usize,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<ChainSample> {
    check_start(spec, x0, xi0)?;
    let mut rng = stream_rng(seed, stream);
    let mut state = HybridState::new(x0.to_vec(), xi0);
    let mut steps = Vec::with_capacity(n);
    let mut jump_times = Vec::with_capacity(n + 1);
    let mut t = 0.0;
    jump_times.push(t);
    for _ in 0..n {
        let (next, record) = step_chain(spec, &state, &mut rng)?;
        t += record.dt;
        jump_times.push(t);
        steps.push(record);
        state = next;
    }
    Ok(ChainSample { x0: x0.to_vec(), xi0, steps, jump_times, seed, stream })
}

/// The continuous-time trajectory the sample encodes, at time t: the
/// segment containing t is located by binary search and its flow applied
/// from the segment's start state. Right-continuous at jump times.
///
/// Times at or past the last jump are a range error; the caller must
/// extend the chain instead.
pub fn evaluate_trajectory(
    sample: &ChainSample,
    spec: &SystemSpec,
    t: f64,
) -> Result<(Vec<f64>, usize)> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("trajectory time must be nonnegative, got {t}")));
    }
    let t_last = *sample.jump_times.last().expect("jump_times holds at least 0");
    if t >= t_last {
        return Err(Error::Range(format!(
            "time {t} is at or past the last jump time {t_last}; extend the chain to evaluate there"
        )));
    }
    let m = sample.jump_times.partition_point(|&tm| tm <= t) - 1;
    let start = if m == 0 { &sample.x0 } else { &sample.steps[m - 1].x };
    let driver = sample.steps[m].flow;
    let x = evaluate_flow(spec, driver, t - sample.jump_times[m], start)?;
    Ok((x, driver))
}

/// How an ensemble starts.
#[derive(Debug, Clone)]
pub enum EnsembleInit {
    /// One state per trajectory, or a single state broadcast to all.
    States(Vec<HybridState>),
    /// Each trajectory draws its start from the measure on its own stream.
    /// A position-only measure gets its flow index from the initial-flow
    /// law at the drawn point.
    Measure(EmpiricalMeasure),
}

fn initial_state<R: RngCore + ?Sized>(
    spec: &SystemSpec,
    init: &EnsembleInit,
    atoms: &[(HybridState, f64)],
    cumulative: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<HybridState> {
    match init {
        EnsembleInit::States(states) => {
            Ok(if states.len() == 1 { states[0].clone() } else { states[k].clone() })
        }
        EnsembleInit::Measure(mu) => {
            let total = *cumulative.last().expect("measures have at least one atom");
            let u = rng.uniform() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
            let mut state = atoms[idx].0.clone();
            if !mu.is_hybrid() {
                state.flow = draw_initial_flow(spec, &state.x, rng)?;
            }
            Ok(state)
        }
    }
}

/// States of n_traj independent chains after each of 0..=n_steps steps.
/// Trajectory k runs entirely on stream k, so the result is a pure
/// function of the arguments no matter how work is split across threads.
pub fn ensemble_states(
    spec: &SystemSpec,
    init: &EnsembleInit,
    n_steps: usize,
    n_traj: usize,
    seed: u64,
) -> Result<Vec<Vec<HybridState>>> {
    if n_traj < 1 {
        return Err(Error::Config("ensemble needs at least one trajectory".into()));
    }
    let (atoms, cumulative) = match init {
        EnsembleInit::States(states) => {
            if states.len() != 1 && states.len() != n_traj {
                return Err(Error::Config(format!(
                    "{} start states for {} trajectories; pass one or one per trajectory",
                    states.len(),
                    n_traj
                )));
            }
            (Vec::new(), Vec::new())
        }
        EnsembleInit::Measure(mu) => {
            let atoms: Vec<(HybridState, f64)> = mu.weighted_states().collect();
            let mut cumulative = Vec::with_capacity(atoms.len());
            let mut acc = 0.0;
            for (_, w) in &atoms {
                acc += w;
                cumulative.push(acc);
            }
            (atoms, cumulative)
        }
    };

    let rows: Result<Vec<Vec<HybridState>>> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut state = initial_state(spec, init, &atoms, &cumulative, k, &mut rng)?;
            check_start(spec, &state.x, state.flow)?;
            let mut path = Vec::with_capacity(n_steps + 1);
            path.push(state.clone());
            for _ in 0..n_steps {
                let (next, _) = step_chain(spec, &state, &mut rng)?;
                path.push(next.clone());
                state = next;
            }
            Ok(path)
        })
        .collect();
    let rows = rows?;

    Ok((0..=n_steps)
        .map(|m| rows.iter().map(|r| r[m].clone()).collect())
        .collect())
}

/// Empirical measure of the ensemble after each of 0..=n_steps steps.
pub fn sample_ensemble(
    spec: &SystemSpec,
    init: &EnsembleInit,
    n_steps: usize,
    n_traj: usize,
    seed: u64,
) -> Result<Vec<EmpiricalMeasure>> {
    ensemble_states(spec, init, n_steps, n_traj, seed)?
        .iter()
        .map(|states| EmpiricalMeasure::from_states(&spec.space, states))
        .collect()
}

/// CSV dump of ensemble states: `step,traj,xi,x...` with the position
/// expanded per coordinate.
pub fn ensemble_to_csv(steps: &[Vec<HybridState>], dimension: usize) -> String {
    let mut out = String::from("step,traj,xi");
    for k in 0..dimension {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for (m, states) in steps.iter().enumerate() {
        for (k, s) in states.iter().enumerate() {
            let _ = write!(out, "{m},{k},{}", s.flow);
            for c in &s.x {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
    }
    out
}
