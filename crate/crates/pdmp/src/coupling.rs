//! An explicit coupling of two one-step transitions, split into a shared
//! part and a residual.
//!
//! The shared part moves both coordinates with one (time, flow, jump)
//! triple; its density at (t, j, s) is the exponential time weight times
//! the minimum of the two coordinates' switching weights
//! w(t, j, s) = p_{ij}(x) pbar_s(flow_j(t, x)). Whatever mass the minimum
//! leaves over is made up by an independent product of the per-coordinate
//! residuals, so each coordinate's marginal is exactly its own transition
//! law. Sampling never integrates anything: the shared branch is an
//! accept step with probability m(t) = sum of minima, the residual is
//! per-coordinate rejection against the minimum.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{check_prob_vec, evaluate_flow, SystemSpec};
use crate::quad::QuadratureSpec;
use crate::rng::{categorical_at, exponential_time, stream_rng, UniformSource};
use crate::sim::step_chain;
use crate::space::{hybrid_distance, HybridState};

/// Cap on per-coordinate rejection rounds; hitting it means the residual
/// has essentially no mass and the draw should have been shared.
const RESIDUAL_CAP: usize = 1_000_000;

/// A pair of states advanced together, with the branch that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub first: HybridState,
    pub second: HybridState,
    /// True when the transition came from the shared branch.
    pub coupled: bool,
}

/// A coupled transition plus the draws behind it. On the shared branch
/// (t, flow, jump) is the common triple; on the residual branch it is the
/// first coordinate's accepted triple.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDraw {
    pub state: CoupledState,
    pub t: f64,
    pub flow: usize,
    pub jump: usize,
}

/// Model-constant summary of one pair: the shared mass, the linear bound
/// its complement must respect, and the contraction factor of the shared
/// branch on favorable times.
#[derive(Debug, Clone, Copy)]
pub struct CouplingDiagnostics {
    pub coupled_mass: f64,
    pub residual_bound: f64,
    pub beta: f64,
}

fn check_state(spec: &SystemSpec, state: &HybridState, which: &str) -> Result<()> {
    if state.x.len() != spec.space.dimension
        || state.x.iter().any(|c| !c.is_finite())
        || state.flow >= spec.n_flows()
    {
        return Err(Error::Domain(format!("{which} coupling state does not fit the system")));
    }
    Ok(())
}

/// Switching weights of one coordinate at shared time t: w_{js} laid out
/// j-major, using that coordinate's own switch row and flow positions.
fn weight_table(
    spec: &SystemSpec,
    row: &[f64],
    x: &[f64],
    t: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n_jumps = spec.n_jumps();
    let mut table = vec![0.0; row.len() * n_jumps];
    let mut landings = Vec::with_capacity(row.len());
    for (j, &pj) in row.iter().enumerate() {
        let y = evaluate_flow(spec, j, t, x)?;
        if pj > 0.0 {
            let law = spec.probs.jump_dist.evaluate(&y);
            check_prob_vec(&law, "jump law")?;
            for (s, &ps) in law.iter().enumerate() {
                table[j * n_jumps + s] = pj * ps;
            }
        }
        landings.push(y);
    }
    Ok((table, landings))
}

/// Mass of the shared branch: the time integral of m(t) under the
/// exponential weight, clamped into [0, 1].
pub fn coupled_mass(
    spec: &SystemSpec,
    s1: &HybridState,
    s2: &HybridState,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_state(spec, s1, "first")?;
    check_state(spec, s2, "second")?;
    let rule = quad.rule(spec.lambda)?;
    let row1 = spec.probs.flow_matrix.row(&s1.x, s1.flow);
    let row2 = spec.probs.flow_matrix.row(&s2.x, s2.flow);
    check_prob_vec(&row1, "switch matrix row")?;
    check_prob_vec(&row2, "switch matrix row")?;

    let mut mass = 0.0;
    for &(t, w) in &rule {
        let (w1, _) = weight_table(spec, &row1, &s1.x, t)?;
        let (w2, _) = weight_table(spec, &row2, &s2.x, t)?;
        let m: f64 = w1.iter().zip(&w2).map(|(a, b)| a.min(*b)).sum();
        mass += w * m;
    }
    Ok(mass.clamp(0.0, 1.0))
}

/// Shared mass with the linear residual bound and contraction factor from
/// the model's declared constants.
pub fn coupling_diagnostics(
    spec: &SystemSpec,
    s1: &HybridState,
    s2: &HybridState,
    quad: &QuadratureSpec,
) -> Result<CouplingDiagnostics> {
    let k = spec.constants()?;
    if spec.lambda <= k.flow_rate {
        return Err(Error::Config(format!(
            "residual bound needs intensity above the flow rate ({} vs {})",
            spec.lambda, k.flow_rate
        )));
    }
    let mass = coupled_mass(spec, s1, s2, quad)?;
    let l = k.switch_lip + spec.lambda * k.flow_lip * k.jump_prob_lip / (spec.lambda - k.flow_rate);
    let rho = spec.space.distance(&s1.x, &s2.x);
    let index_gap = if s1.flow == s2.flow { 0.0 } else { 1.0 };
    Ok(CouplingDiagnostics {
        coupled_mass: mass,
        residual_bound: l * rho + 2.0 * spec.n_flows() as f64 * index_gap,
        beta: spec.lambda * k.flow_lip * k.jump_lip / (spec.lambda - k.flow_rate),
    })
}

fn move_with(spec: &SystemSpec, x: &[f64], t: f64, flow: usize, jump: usize) -> Result<HybridState> {
    let y = evaluate_flow(spec, flow, t, x)?;
    Ok(HybridState::new(spec.jumps[jump].apply(&y), flow))
}

/// One coordinate's residual draw: propose from its own transition law,
/// reject in proportion to the shared minimum.
fn residual_draw<R: RngCore + ?Sized>(
    spec: &SystemSpec,
    own_row: &[f64],
    own_x: &[f64],
    other_row: &[f64],
    other_x: &[f64],
    rng: &mut R,
) -> Result<(f64, usize, usize)> {
    for _ in 0..RESIDUAL_CAP {
        let t = exponential_time(spec.lambda, rng);
        let j = categorical_at(own_row, rng.uniform());
        let y = evaluate_flow(spec, j, t, own_x)?;
        let law = spec.probs.jump_dist.evaluate(&y);
        check_prob_vec(&law, "jump law")?;
        let s = categorical_at(&law, rng.uniform());
        let w_own = own_row[j] * law[s];

        let y_other = evaluate_flow(spec, j, t, other_x)?;
        let law_other = spec.probs.jump_dist.evaluate(&y_other);
        check_prob_vec(&law_other, "jump law")?;
        let w_other = other_row[j] * law_other[s];

        let keep = 1.0 - w_own.min(w_other) / w_own;
        if rng.uniform() < keep {
            return Ok((t, j, s));
        }
    }
    Err(Error::Numeric(format!(
        "residual sampler rejected {RESIDUAL_CAP} proposals; the residual mass is degenerate"
    )))
}

/// One exact draw from the coupling, with the draws that produced it.
///
/// Bitwise-equal states short-circuit to a single shared transition, so
/// the diagonal absorbs exactly. Otherwise one proposal time decides the
/// branch: accepted with probability m(t), the shared (flow, jump) is
/// drawn from the minimum weights; rejected, each coordinate runs its own
/// residual rejection, first coordinate first.
pub fn sample_coupling_traced<R: RngCore + ?Sized>(
    spec: &SystemSpec,
    s1: &HybridState,
    s2: &HybridState,
    rng: &mut R,
) -> Result<CouplingDraw> {
    check_state(spec, s1, "first")?;
    check_state(spec, s2, "second")?;

    if s1 == s2 {
        let (next, rec) = step_chain(spec, s1, rng)?;
        return Ok(CouplingDraw {
            state: CoupledState { first: next.clone(), second: next, coupled: true },
            t: rec.dt,
            flow: rec.flow,
            jump: rec.jump,
        });
    }

    let row1 = spec.probs.flow_matrix.row(&s1.x, s1.flow);
    let row2 = spec.probs.flow_matrix.row(&s2.x, s2.flow);
    check_prob_vec(&row1, "switch matrix row")?;
    check_prob_vec(&row2, "switch matrix row")?;
    let n_jumps = spec.n_jumps();

    let t = exponential_time(spec.lambda, rng);
    let (w1, _) = weight_table(spec, &row1, &s1.x, t)?;
    let (w2, _) = weight_table(spec, &row2, &s2.x, t)?;
    let minima: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a.min(*b)).collect();
    let m: f64 = minima.iter().sum();

    if rng.uniform() < m {
        let shared: Vec<f64> = minima.iter().map(|w| w / m).collect();
        let idx = categorical_at(&shared, rng.uniform());
        let (flow, jump) = (idx / n_jumps, idx % n_jumps);
        let first = move_with(spec, &s1.x, t, flow, jump)?;
        let second = move_with(spec, &s2.x, t, flow, jump)?;
        return Ok(CouplingDraw {
            state: CoupledState { first, second, coupled: true },
            t,
            flow,
            jump,
        });
    }

    let (t1, j1, e1) = residual_draw(spec, &row1, &s1.x, &row2, &s2.x, rng)?;
    let (t2, j2, e2) = residual_draw(spec, &row2, &s2.x, &row1, &s1.x, rng)?;
    let first = move_with(spec, &s1.x, t1, j1, e1)?;
    let second = move_with(spec, &s2.x, t2, j2, e2)?;
    Ok(CouplingDraw {
        state: CoupledState { first, second, coupled: false },
        t: t1,
        flow: j1,
        jump: e1,
    })
}

/// One exact draw from the coupling.
pub fn sample_coupling<R: RngCore + ?Sized>(
    spec: &SystemSpec,
    s1: &HybridState,
    s2: &HybridState,
    rng: &mut R,
) -> Result<CoupledState> {
    Ok(sample_coupling_traced(spec, s1, s2, rng)?.state)
}

/// One coupled transition with its before/after distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledChainStep {
    pub draw: CouplingDraw,
    pub d_before: f64,
    pub d_after: f64,
}

/// A chain of coupled transitions from one pair of starts.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledChain {
    pub first0: HybridState,
    pub second0: HybridState,
    pub steps: Vec<CoupledChainStep>,
    pub seed: u64,
    pub stream: u64,
}

impl CoupledChain {
    /// CSV dump, one row per transition:
    /// `step,branch,d_before,d_after,t,j,s` with branch Q (shared) or R.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("step,branch,d_before,d_after,t,j,s\n");
        for (m, step) in self.steps.iter().enumerate() {
            let branch = if step.draw.state.coupled { "Q" } else { "R" };
            let _ = writeln!(
                out,
                "{},{branch},{},{},{},{},{}",
                m + 1,
                step.d_before,
                step.d_after,
                step.draw.t,
                step.draw.flow,
                step.draw.jump
            );
        }
        out
    }
}

/// n coupled transitions on the stream's own generator.
pub fn run_coupled_chain(
    spec: &SystemSpec,
    s1: &HybridState,
    s2: &HybridState,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<CoupledChain> {
    let mut rng = stream_rng(seed, stream);
    let mut here = (s1.clone(), s2.clone());
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let d_before = hybrid_distance(&here.0, &here.1, &spec.space);
        let draw = sample_coupling_traced(spec, &here.0, &here.1, &mut rng)?;
        let d_after = hybrid_distance(&draw.state.first, &draw.state.second, &spec.space);
        here = (draw.state.first.clone(), draw.state.second.clone());
        steps.push(CoupledChainStep { draw, d_before, d_after });
    }
    Ok(CoupledChain { first0: s1.clone(), second0: s2.clone(), steps, seed, stream })
}

/// Per-step mean distance ratios of a coupled ensemble.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ContractionEstimate {
    /// mean d_after / mean d_before per step, over shared-branch
    /// transitions from distinct states; steps with no such transitions
    /// are omitted.
    pub q_ratios: Vec<f64>,
    /// Same over all transitions from distinct states.
    pub all_ratios: Vec<f64>,
    /// Largest shared-branch ratio; absent when every transition started
    /// on the diagonal.
    pub beta_hat: Option<f64>,
}

/// Runs n_rep coupled chains from every pair and measures how fast the
/// shared branch pulls coordinates together. Replica (pair p, repeat r)
/// uses stream p * n_rep + r.
pub fn coupling_contraction_estimate(
    spec: &SystemSpec,
    pairs: &[(HybridState, HybridState)],
    n_steps: usize,
    n_rep: usize,
    seed: u64,
) -> Result<ContractionEstimate> {
    if n_rep < 1 || pairs.is_empty() {
        return Err(Error::Config("contraction estimate needs pairs and repeats".into()));
    }
    let mut q_num = vec![0.0; n_steps];
    let mut q_den = vec![0.0; n_steps];
    let mut all_num = vec![0.0; n_steps];
    let mut all_den = vec![0.0; n_steps];
    for (p, (a, b)) in pairs.iter().enumerate() {
        for r in 0..n_rep {
            let stream = (p * n_rep + r) as u64;
            let chain = run_coupled_chain(spec, a, b, n_steps, seed, stream)?;
            for (k, step) in chain.steps.iter().enumerate() {
                if step.d_before == 0.0 {
                    continue;
                }
                all_num[k] += step.d_after;
                all_den[k] += step.d_before;
                if step.draw.state.coupled {
                    q_num[k] += step.d_after;
                    q_den[k] += step.d_before;
                }
            }
        }
    }
    let ratios = |num: &[f64], den: &[f64]| -> Vec<f64> {
        num.iter()
            .zip(den)
            .filter(|(_, &d)| d > 0.0)
            .map(|(&n, &d)| n / d)
            .collect()
    };
    let q_ratios = ratios(&q_num, &q_den);
    let all_ratios = ratios(&all_num, &all_den);
    let beta_hat = q_ratios.iter().cloned().fold(None, |acc: Option<f64>, r| {
        Some(acc.map_or(r, |a| a.max(r)))
    });
    Ok(ContractionEstimate { q_ratios, all_ratios, beta_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::quad::QuadMethod;

    fn gl() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn diagonal_is_absorbing_exactly() {
        let spec = models::genetoggle(1.0);
        let mut rng = stream_rng(4, 0);
        let mut pair = (HybridState::new(vec![0.37], 1), HybridState::new(vec![0.37], 1));
        for _ in 0..200 {
            let draw = sample_coupling_traced(&spec, &pair.0, &pair.1, &mut rng).unwrap();
            assert!(draw.state.coupled);
            assert_eq!(draw.state.first, draw.state.second);
            pair = (draw.state.first, draw.state.second);
        }
    }

    #[test]
    fn identical_states_carry_full_shared_mass() {
        let spec = models::genetoggle(1.0);
        let s = HybridState::new(vec![0.2], 0);
        let m = coupled_mass(&spec, &s, &s, &gl()).unwrap();
        assert!((m - 1.0).abs() < 1e-9, "got {m}");
    }

    #[test]
    fn first_marginal_matches_the_single_chain_law() {
        let spec = models::genetoggle(1.0);
        let s1 = HybridState::new(vec![0.2], 0);
        let s2 = HybridState::new(vec![0.8], 1);
        let n = 100_000usize;

        let mut rng = stream_rng(100, 0);
        let mut coupled_x = Vec::with_capacity(n);
        let mut coupled_flows = [0usize; 2];
        for _ in 0..n {
            let draw = sample_coupling(&spec, &s1, &s2, &mut rng).unwrap();
            coupled_x.push(draw.first.x[0]);
            coupled_flows[draw.first.flow] += 1;
        }

        let mut rng = stream_rng(101, 0);
        let mut direct_x = Vec::with_capacity(n);
        let mut direct_flows = [0usize; 2];
        for _ in 0..n {
            let (next, _) = step_chain(&spec, &s1, &mut rng).unwrap();
            direct_x.push(next.x[0]);
            direct_flows[next.flow] += 1;
        }

        // flow indices: 2x2 homogeneity chi-square, df 1, critical 6.63
        let mut chi2 = 0.0;
        for k in 0..2 {
            let total = (coupled_flows[k] + direct_flows[k]) as f64;
            let expected = total / 2.0;
            for obs in [coupled_flows[k] as f64, direct_flows[k] as f64] {
                chi2 += (obs - expected) * (obs - expected) / expected;
            }
        }
        assert!(chi2 < 6.63, "flow-index chi2 {chi2}");

        // positions: two-sample KS, critical at level 0.01
        coupled_x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        direct_x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < n && j < n {
            if coupled_x[i] <= direct_x[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        let critical = 1.628 * (2.0 / n as f64).sqrt();
        assert!(d < critical, "position KS {d} vs {critical}");
    }

    #[test]
    fn shared_mass_agrees_with_monte_carlo() {
        let spec = models::genetoggle(1.0);
        let s1 = HybridState::new(vec![0.0], 0);
        let s2 = HybridState::new(vec![0.1], 0);
        let exact = 1.0 - 0.05421875;
        let quad_mass = coupled_mass(&spec, &s1, &s2, &gl()).unwrap();
        assert!((quad_mass - exact).abs() < 2e-3);

        let n = 100_000usize;
        let mut rng = stream_rng(55, 0);
        let mut hits = 0usize;
        for _ in 0..n {
            if sample_coupling(&spec, &s1, &s2, &mut rng).unwrap().coupled {
                hits += 1;
            }
        }
        let mc = hits as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((mc - exact).abs() < 3.0 * se, "mc {mc}, exact {exact}, se {se}");
    }

    #[test]
    fn residual_mass_obeys_the_linear_bound() {
        let spec = models::genetoggle(1.0);
        // l = L_p + lambda L L_pbar / (lambda - alpha) = 1 + 1/2
        let l = 1.5;
        let quad = QuadratureSpec { method: QuadMethod::GaussLaguerre, nodes: 96, truncation: None };
        let mut rng = stream_rng(61, 0);
        for _ in 0..200 {
            let x1 = rng.uniform();
            let x2 = rng.uniform();
            let i1 = usize::from(rng.uniform() < 0.5);
            let i2 = usize::from(rng.uniform() < 0.5);
            let s1 = HybridState::new(vec![x1], i1);
            let s2 = HybridState::new(vec![x2], i2);
            let diag = coupling_diagnostics(&spec, &s1, &s2, &quad).unwrap();
            assert!((diag.beta - 0.25).abs() < 1e-12);
            let residual = 1.0 - diag.coupled_mass;
            let bound = l * (x1 - x2).abs() + 4.0 * f64::from(u8::from(i1 != i2));
            assert!((diag.residual_bound - bound).abs() < 1e-12);
            assert!(residual <= bound + 5e-3, "residual {residual} vs bound {bound}");
        }
    }

    #[test]
    fn shared_branch_contracts_at_the_declared_rate() {
        // single flow and jump: every draw is shared, d_after = e^{-t}/2,
        // so the mean equals beta = 1/4 and the favorable-time window
        // {t > ln 2} has probability exactly 1/2
        let spec = models::linear1d(1.0, 1.0);
        let s1 = HybridState::new(vec![0.0], 0);
        let s2 = HybridState::new(vec![1.0], 0);
        let beta = 0.25;
        let n = 100_000usize;
        let mut rng = stream_rng(71, 0);
        let mut dists = Vec::with_capacity(n);
        let mut favorable = 0usize;
        for _ in 0..n {
            let draw = sample_coupling_traced(&spec, &s1, &s2, &mut rng).unwrap();
            assert!(draw.state.coupled, "full overlap forces the shared branch");
            let d = hybrid_distance(&draw.state.first, &draw.state.second, &spec.space);
            dists.push(d);
            if d < beta {
                favorable += 1;
            }
        }
        let mean: f64 = dists.iter().sum::<f64>() / n as f64;
        let var: f64 =
            dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(mean <= beta + 3.0 * se, "mean {mean} vs beta {beta}");

        let frac = favorable as f64 / n as f64;
        let p_se = (0.5 * 0.5 / n as f64).sqrt();
        assert!(frac >= 0.5 - 3.0 * p_se, "favorable fraction {frac}");
        assert!((frac - 0.5).abs() < 0.01);
    }

    #[test]
    fn contraction_estimate_reads_beta_off_the_ensemble() {
        let spec = models::linear1d(1.0, 1.0);
        let mut rng = stream_rng(81, 0);
        let pairs: Vec<(HybridState, HybridState)> = (0..100)
            .map(|_| {
                (
                    HybridState::new(vec![2.0 * rng.uniform() - 1.0], 0),
                    HybridState::new(vec![2.0 * rng.uniform() - 1.0], 0),
                )
            })
            .collect();
        let est = coupling_contraction_estimate(&spec, &pairs, 3, 100, 5).unwrap();
        let beta_hat = est.beta_hat.unwrap();
        assert!(beta_hat <= 0.25 + 0.05, "beta_hat {beta_hat}");
        assert_eq!(est.q_ratios.len(), est.all_ratios.len());
    }

    #[test]
    fn degenerate_and_diagonal_ensembles_stay_diagnostic() {
        let spec = models::constjump(1.0);
        let pairs = vec![(HybridState::new(vec![-3.0], 0), HybridState::new(vec![6.0], 0))];
        let est = coupling_contraction_estimate(&spec, &pairs, 4, 50, 1).unwrap();
        assert_eq!(est.beta_hat, Some(0.0), "one step collapses every pair");
        assert_eq!(est.q_ratios.len(), 1, "later steps start on the diagonal");

        let spec = models::genetoggle(1.0);
        let diagonal = vec![(HybridState::new(vec![0.5], 0), HybridState::new(vec![0.5], 0))];
        let est = coupling_contraction_estimate(&spec, &diagonal, 3, 20, 2).unwrap();
        assert!(est.q_ratios.is_empty());
        assert_eq!(est.beta_hat, None);
    }

    #[test]
    fn shared_branch_is_dominated_by_the_single_chain_law() {
        // shared-branch draws landing in a box happen no more often than
        // single-chain draws do, up to noise
        let spec = models::genetoggle(1.0);
        let s1 = HybridState::new(vec![0.3], 0);
        let s2 = HybridState::new(vec![0.6], 1);
        let in_box = |s: &HybridState| s.flow == 0 && s.x[0] >= 0.2 && s.x[0] <= 0.5;
        let n = 100_000usize;

        let mut rng = stream_rng(91, 0);
        let mut q_hits = 0usize;
        for _ in 0..n {
            let draw = sample_coupling(&spec, &s1, &s2, &mut rng).unwrap();
            if draw.coupled && in_box(&draw.first) {
                q_hits += 1;
            }
        }
        let mut rng = stream_rng(92, 0);
        let mut p_hits = 0usize;
        for _ in 0..n {
            if in_box(&step_chain(&spec, &s1, &mut rng).unwrap().0) {
                p_hits += 1;
            }
        }
        let (q_frac, p_frac) = (q_hits as f64 / n as f64, p_hits as f64 / n as f64);
        let se = (p_frac * (1.0 - p_frac) / n as f64).sqrt();
        assert!(q_frac <= p_frac + 3.0 * se, "Q {q_frac} vs P {p_frac}");
    }

    #[test]
    fn coupled_chain_trace_has_the_declared_schema() {
        let spec = models::genetoggle(1.0);
        let s1 = HybridState::new(vec![0.1], 0);
        let s2 = HybridState::new(vec![0.9], 1);
        let chain = run_coupled_chain(&spec, &s1, &s2, 5, 3, 0).unwrap();
        assert_eq!(chain.steps.len(), 5);
        let csv = chain.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,branch,d_before,d_after,t,j,s");
        assert_eq!(lines.len(), 6);
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7);
            assert!(fields[1] == "Q" || fields[1] == "R");
        }
        let d0: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert!((d0 - (0.8 + 1.0)).abs() < 1e-12, "start distance {d0}");

        let again = run_coupled_chain(&spec, &s1, &s2, 5, 3, 0).unwrap();
        assert_eq!(chain, again);
    }
}
