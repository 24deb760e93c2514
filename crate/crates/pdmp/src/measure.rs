//! Empirical measures and the Fortet-Mourier distance between them.
//!
//! Measures are finite weighted atom sets over a state space, either
//! position-only or carrying a flow index per atom (hybrid). The distance
//! maximizes sum c_i f(z_i) over test functions bounded by 1 and Lipschitz
//! for the (hybrid) metric, where c is the signed weight difference on the
//! merged support. With the metric truncated at 2 this is a transportation
//! problem, solved exactly by the network simplex in `transport`; a
//! brute-force grid oracle over tiny supports verifies it independently.

mod transport;

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::UniformSource;
use crate::space::{HybridState, StateSpace};
use transport::solve_transport;

/// Largest combined support `fm_distance` accepts; bigger ensembles must be
/// subsampled first.
pub const SUPPORT_CAP: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
struct Atom {
    x: Vec<f64>,
    /// Meaningful only when the measure is hybrid; 0 otherwise.
    flow: usize,
    weight: f64,
}

/// A finitely supported probability measure; atoms at bitwise-equal
/// locations are merged at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    space: StateSpace,
    hybrid: bool,
    atoms: Vec<Atom>,
}

fn atom_key(x: &[f64], flow: usize) -> (usize, Vec<u64>) {
    (flow, x.iter().map(|c| c.to_bits()).collect())
}

impl EmpiricalMeasure {
    fn build(space: &StateSpace, hybrid: bool, raw: Vec<Atom>) -> Result<Self> {
        space.check()?;
        if raw.is_empty() {
            return Err(Error::Config("measure needs at least one atom".into()));
        }
        let mut merged: Vec<Atom> = Vec::new();
        let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
        let mut mass = 0.0;
        for atom in raw {
            if atom.x.len() != space.dimension {
                return Err(Error::Config(format!(
                    "atom has {} coordinates, space has {}",
                    atom.x.len(),
                    space.dimension
                )));
            }
            if atom.x.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain("atom coordinates must be finite".into()));
            }
            if !(atom.weight > 0.0) || !atom.weight.is_finite() {
                return Err(Error::Probability(format!(
                    "atom weight must be positive, got {}",
                    atom.weight
                )));
            }
            mass += atom.weight;
            match index.entry(atom_key(&atom.x, atom.flow)) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    merged[*e.get()].weight += atom.weight;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(merged.len());
                    merged.push(atom);
                }
            }
        }
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Probability(format!("measure mass {mass} not 1 within 1e-9")));
        }
        Ok(EmpiricalMeasure { space: space.clone(), hybrid, atoms: merged })
    }

    /// Uniformly weighted hybrid measure on the given states.
    pub fn from_states(space: &StateSpace, states: &[HybridState]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Config("measure needs at least one atom".into()));
        }
        let w = 1.0 / states.len() as f64;
        let raw = states
            .iter()
            .map(|s| Atom { x: s.x.clone(), flow: s.flow, weight: w })
            .collect();
        Self::build(space, true, raw)
    }

    /// Weighted position-only measure.
    pub fn from_points(space: &StateSpace, atoms: &[(Vec<f64>, f64)]) -> Result<Self> {
        let raw = atoms
            .iter()
            .map(|(x, w)| Atom { x: x.clone(), flow: 0, weight: *w })
            .collect();
        Self::build(space, false, raw)
    }

    /// Weighted hybrid measure.
    pub fn from_hybrid(space: &StateSpace, atoms: &[(HybridState, f64)]) -> Result<Self> {
        let raw = atoms
            .iter()
            .map(|(s, w)| Atom { x: s.x.clone(), flow: s.flow, weight: *w })
            .collect();
        Self::build(space, true, raw)
    }

    /// Point mass at a position.
    pub fn dirac_point(space: &StateSpace, x: Vec<f64>) -> Result<Self> {
        Self::build(space, false, vec![Atom { x, flow: 0, weight: 1.0 }])
    }

    /// Point mass at a hybrid state.
    pub fn dirac_state(space: &StateSpace, state: HybridState) -> Result<Self> {
        Self::build(space, true, vec![Atom { x: state.x, flow: state.flow, weight: 1.0 }])
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn is_hybrid(&self) -> bool {
        self.hybrid
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Atoms as (position, flow index when hybrid, weight).
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], Option<usize>, f64)> + '_ {
        let hybrid = self.hybrid;
        self.atoms
            .iter()
            .map(move |a| (a.x.as_slice(), hybrid.then_some(a.flow), a.weight))
    }

    /// Atoms as weighted hybrid states (flow 0 for position-only measures).
    pub fn weighted_states(&self) -> impl Iterator<Item = (HybridState, f64)> + '_ {
        self.atoms
            .iter()
            .map(|a| (HybridState::new(a.x.clone(), a.flow), a.weight))
    }

    /// Drops the flow index and re-merges atoms that now coincide.
    pub fn y_marginal(&self) -> Self {
        let raw = self
            .atoms
            .iter()
            .map(|a| Atom { x: a.x.clone(), flow: 0, weight: a.weight })
            .collect();
        Self::build(&self.space, false, raw).expect("marginal of a valid measure is valid")
    }

    /// Weighted sum of f over the atoms; position-only measures present
    /// their atoms with flow index 0.
    pub fn integrate(&self, f: impl Fn(&HybridState) -> f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * f(&HybridState::new(a.x.clone(), a.flow)))
            .sum()
    }

    /// Serializes as CSV: `weight,x0,..` plus a trailing `xi` column for
    /// hybrid measures.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("weight");
        for k in 0..self.space.dimension {
            let _ = write!(out, ",x{k}");
        }
        if self.hybrid {
            out.push_str(",xi");
        }
        out.push('\n');
        for atom in &self.atoms {
            let _ = write!(out, "{}", atom.weight);
            for c in &atom.x {
                let _ = write!(out, ",{c}");
            }
            if self.hybrid {
                let _ = write!(out, ",{}", atom.flow);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the `to_csv` format; the header decides whether the measure
    /// is hybrid.
    pub fn from_csv(space: &StateSpace, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("measure csv is empty".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let hybrid = cols.last() == Some(&"xi");
        let coord_cols = cols.len() - 1 - usize::from(hybrid);
        if cols.first() != Some(&"weight") || coord_cols != space.dimension {
            return Err(Error::Parse(format!(
                "measure csv header '{header}' does not match a {}-dimensional measure",
                space.dimension
            )));
        }
        let mut raw = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!(
                    "measure csv line {}: {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("measure csv line {}: bad number '{s}'", lineno + 2)))
            };
            let weight = parse(fields[0])?;
            let x = fields[1..1 + space.dimension]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<Vec<f64>>>()?;
            let flow = if hybrid {
                fields[cols.len() - 1].parse::<usize>().map_err(|_| {
                    Error::Parse(format!(
                        "measure csv line {}: bad index '{}'",
                        lineno + 2,
                        fields[cols.len() - 1]
                    ))
                })?
            } else {
                0
            };
            raw.push(Atom { x, flow, weight });
        }
        Self::build(space, hybrid, raw)
    }

    fn support_distance(&self, a: &Atom, b: &Atom) -> f64 {
        let rho = self.space.distance(&a.x, &b.x);
        if self.hybrid && a.flow != b.flow {
            rho + 1.0
        } else {
            rho
        }
    }
}

/// `m` atoms redrawn with replacement by weight, uniformly reweighted.
pub fn subsample<R: RngCore + ?Sized>(
    mu: &EmpiricalMeasure,
    m: usize,
    rng: &mut R,
) -> Result<EmpiricalMeasure> {
    if m < 1 {
        return Err(Error::Config("subsample size must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mu.atoms.len());
    let mut acc = 0.0;
    for atom in &mu.atoms {
        acc += atom.weight;
        cumulative.push(acc);
    }
    let w = 1.0 / m as f64;
    let raw: Vec<Atom> = (0..m)
        .map(|_| {
            let u = rng.uniform() * acc;
            let k = cumulative.partition_point(|&c| c <= u).min(mu.atoms.len() - 1);
            Atom { x: mu.atoms[k].x.clone(), flow: mu.atoms[k].flow, weight: w }
        })
        .collect();
    EmpiricalMeasure::build(&mu.space, mu.hybrid, raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FMStatus {
    Optimal,
    /// The pivot cap was reached; the value is the best basis found.
    ToleranceLimited,
}

/// Result of a distance computation, with the optimal test function
/// sampled on the merged support for independent feasibility checking.
#[derive(Debug, Clone)]
pub struct FMResult {
    pub value: f64,
    pub status: FMStatus,
    /// Merged support of the two measures; index part 0 throughout for
    /// position-only measures.
    pub support: Vec<HybridState>,
    pub hybrid: bool,
    /// Test function values aligned with `support`.
    pub witness: Vec<f64>,
}

/// Exact Fortet-Mourier distance between two measures on the same space.
///
/// Equals the cost of optimally transporting the positive part of mu1-mu2
/// to its negative part under the metric truncated at 2: truncation encodes
/// the |f| <= 1 cap, and the optimal transport potentials extend to a
/// feasible test function that attains the same objective. The first
/// nonzero weight difference is canonically oriented positive before
/// solving, making the computation exactly symmetric in its arguments.
pub fn fm_distance(mu1: &EmpiricalMeasure, mu2: &EmpiricalMeasure) -> Result<FMResult> {
    if mu1.space != mu2.space {
        return Err(Error::Config("fm_distance requires measures on the same space".into()));
    }
    if mu1.hybrid != mu2.hybrid {
        return Err(Error::Config(
            "fm_distance requires both measures hybrid or both position-only".into(),
        ));
    }

    // merged support with signed weight differences
    let mut support: Vec<Atom> = Vec::new();
    let mut c: Vec<f64> = Vec::new();
    let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    for (measure, sign) in [(mu1, 1.0), (mu2, -1.0)] {
        for atom in &measure.atoms {
            match index.entry(atom_key(&atom.x, atom.flow)) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    c[*e.get()] += sign * atom.weight;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(support.len());
                    support.push(atom.clone());
                    c.push(sign * atom.weight);
                }
            }
        }
    }
    if support.len() > SUPPORT_CAP {
        return Err(Error::Capacity(format!(
            "combined support {} exceeds the cap {SUPPORT_CAP}; subsample the measures first",
            support.len()
        )));
    }

    // Insertion order depends on which argument came first; fix a canonical
    // node order so the arithmetic is bitwise symmetric.
    let mut order: Vec<usize> = (0..support.len()).collect();
    order.sort_by_key(|&i| atom_key(&support[i].x, support[i].flow));
    let support: Vec<Atom> = order.iter().map(|&i| support[i].clone()).collect();
    let mut c: Vec<f64> = order.iter().map(|&i| c[i]).collect();

    let flip = c.iter().find(|&&ci| ci != 0.0).map(|&ci| ci < 0.0).unwrap_or(false);
    if flip {
        for ci in &mut c {
            *ci = -*ci;
        }
    }

    let sources: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..c.len()).filter(|&i| c[i] < 0.0).collect();
    let states: Vec<HybridState> = support
        .iter()
        .map(|a| HybridState::new(a.x.clone(), if mu1.hybrid { a.flow } else { 0 }))
        .collect();

    if sources.is_empty() || sinks.is_empty() {
        // equal measures up to the mass tolerance
        return Ok(FMResult {
            value: 0.0,
            status: FMStatus::Optimal,
            witness: vec![0.0; states.len()],
            support: states,
            hybrid: mu1.hybrid,
        });
    }

    let supply: Vec<f64> = sources.iter().map(|&i| c[i]).collect();
    let mut demand: Vec<f64> = sinks.iter().map(|&i| -c[i]).collect();
    let imbalance = supply.iter().sum::<f64>() - demand.iter().sum::<f64>();
    let largest = (0..demand.len())
        .max_by(|&a, &b| demand[a].partial_cmp(&demand[b]).unwrap())
        .unwrap();
    demand[largest] += imbalance;

    let truncated = |i: usize, j: usize| mu1.support_distance(&support[i], &support[j]).min(2.0);
    let cost: Vec<f64> = sources
        .iter()
        .flat_map(|&i| sinks.iter().map(move |&j| truncated(i, j)))
        .collect();

    let solution = solve_transport(&supply, &demand, &cost)?;

    // Witness: the sink-potential extension min_t (cost(z, z_t) + pi_t) is
    // Lipschitz for the truncated metric everywhere and coincides with the
    // optimal potentials on every support node, because each node touches a
    // basic arc with zero reduced cost. Centering puts it inside [-1, 1].
    let mut witness: Vec<f64> = (0..support.len())
        .map(|i| {
            sinks
                .iter()
                .zip(&solution.sink_pot)
                .map(|(&j, &pt)| truncated(i, j) + pt)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let high = witness.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let low = witness.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = 0.5 * (high + low);
    let orient = if flip { -1.0 } else { 1.0 };
    for f in &mut witness {
        *f = orient * (*f - center);
    }

    Ok(FMResult {
        value: solution.cost.max(0.0),
        status: if solution.converged { FMStatus::Optimal } else { FMStatus::ToleranceLimited },
        support: states,
        hybrid: mu1.hybrid,
        witness,
    })
}

/// Brute-force lower bound on the distance for supports of at most three
/// points: exhaustive search of the test function over the grid
/// {-1, -1+res, .., 1} restricted to Lipschitz-feasible points, with the
/// innermost coordinate placed at its feasible-interval endpoint chosen by
/// its weight's sign (the objective is linear, so an endpoint is optimal).
pub fn fm_oracle_grid(
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    resolution: f64,
) -> Result<f64> {
    if mu1.space != mu2.space || mu1.hybrid != mu2.hybrid {
        return Err(Error::Config("fm_oracle_grid requires measures on the same space".into()));
    }
    if !(resolution > 0.0) || resolution > 1e-2 {
        return Err(Error::Config(format!(
            "resolution must be in (0, 1e-2], got {resolution}"
        )));
    }

    let mut support: Vec<Atom> = Vec::new();
    let mut c: Vec<f64> = Vec::new();
    let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    for (measure, sign) in [(mu1, 1.0), (mu2, -1.0)] {
        for atom in &measure.atoms {
            match index.entry(atom_key(&atom.x, atom.flow)) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    c[*e.get()] += sign * atom.weight;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(support.len());
                    support.push(atom.clone());
                    c.push(sign * atom.weight);
                }
            }
        }
    }
    if support.len() > 3 {
        return Err(Error::Capacity(format!(
            "grid oracle supports at most 3 atoms, got {}",
            support.len()
        )));
    }

    let steps = ((2.0 / resolution).round() as usize).max(1);
    let grid: Vec<f64> = (0..=steps).map(|k| -1.0 + k as f64 * 2.0 / steps as f64).collect();
    let d = |i: usize, j: usize| mu1.support_distance(&support[i], &support[j]);

    // endpoint of [lo, hi] by the sign of the weight on a free coordinate
    let endpoint = |lo: f64, hi: f64, ci: f64| if ci >= 0.0 { hi } else { lo };

    match support.len() {
        0 => unreachable!("measures have at least one atom"),
        1 => Ok(0.0),
        2 => {
            let d01 = d(0, 1);
            let mut best = f64::NEG_INFINITY;
            for &f0 in &grid {
                let lo = (f0 - d01).max(-1.0);
                let hi = (f0 + d01).min(1.0);
                let f1 = endpoint(lo, hi, c[1]);
                best = best.max(c[0] * f0 + c[1] * f1);
            }
            Ok(best)
        }
        _ => {
            let (d01, d02, d12) = (d(0, 1), d(0, 2), d(1, 2));
            let mut best = f64::NEG_INFINITY;
            for &f0 in &grid {
                for &f1 in &grid {
                    if (f0 - f1).abs() > d01 {
                        continue;
                    }
                    let lo = (f0 - d02).max(f1 - d12).max(-1.0);
                    let hi = (f0 + d02).min(f1 + d12).min(1.0);
                    // triangle inequality keeps [lo, hi] non-empty
                    let f2 = endpoint(lo, hi, c[2]);
                    best = best.max(c[0] * f0 + c[1] * f1 + c[2] * f2);
                }
            }
            Ok(best)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::space::hybrid_distance;

    fn space1() -> StateSpace {
        StateSpace::euclidean(1)
    }

    #[test]
    fn duplicate_atoms_merge_exactly() {
        let s = space1();
        let states = vec![
            HybridState::new(vec![1.0], 0),
            HybridState::new(vec![1.0], 0),
            HybridState::new(vec![1.0], 1),
            HybridState::new(vec![2.0], 0),
        ];
        let mu = EmpiricalMeasure::from_states(&s, &states).unwrap();
        assert_eq!(mu.n_atoms(), 3);
        let weights: Vec<f64> = mu.atoms().map(|(_, _, w)| w).collect();
        assert_eq!(weights, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn bad_mass_and_bad_weights_are_rejected() {
        let s = space1();
        assert!(EmpiricalMeasure::from_points(&s, &[(vec![0.0], 0.6), (vec![1.0], 0.3)]).is_err());
        assert!(EmpiricalMeasure::from_points(&s, &[(vec![0.0], -0.5), (vec![1.0], 1.5)]).is_err());
        assert!(EmpiricalMeasure::from_points(&s, &[(vec![f64::NAN], 1.0)]).is_err());
    }

    #[test]
    fn y_marginal_merges_across_indices() {
        let s = space1();
        let states = vec![HybridState::new(vec![1.0], 0), HybridState::new(vec![1.0], 1)];
        let mu = EmpiricalMeasure::from_states(&s, &states).unwrap();
        assert_eq!(mu.n_atoms(), 2);
        let marginal = mu.y_marginal();
        assert!(!marginal.is_hybrid());
        assert_eq!(marginal.n_atoms(), 1);
    }

    #[test]
    fn integrate_is_the_weighted_sum() {
        let s = space1();
        let mu =
            EmpiricalMeasure::from_points(&s, &[(vec![1.0], 0.25), (vec![3.0], 0.75)]).unwrap();
        let mean = mu.integrate(|state| state.x[0]);
        assert!((mean - 2.5).abs() < 1e-12);
    }

    #[test]
    fn subsample_of_a_point_mass_is_itself() {
        let s = space1();
        let mu = EmpiricalMeasure::dirac_point(&s, vec![0.7]).unwrap();
        let mut rng = stream_rng(3, 0);
        let sub = subsample(&mu, 25, &mut rng).unwrap();
        assert_eq!(sub.n_atoms(), 1);
        assert!((sub.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subsample_draws_by_weight() {
        let s = space1();
        let mu =
            EmpiricalMeasure::from_points(&s, &[(vec![0.0], 0.9), (vec![1.0], 0.1)]).unwrap();
        let mut rng = stream_rng(11, 0);
        let sub = subsample(&mu, 20_000, &mut rng).unwrap();
        let mass_at_zero: f64 = sub
            .atoms()
            .filter(|(x, _, _)| x[0] == 0.0)
            .map(|(_, _, w)| w)
            .sum();
        assert!((mass_at_zero - 0.9).abs() < 0.01, "got {mass_at_zero}");
    }

    #[test]
    fn fm_of_a_measure_with_itself_is_zero() {
        let s = space1();
        let mu =
            EmpiricalMeasure::from_points(&s, &[(vec![0.0], 0.5), (vec![2.0], 0.5)]).unwrap();
        let r = fm_distance(&mu, &mu).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.status, FMStatus::Optimal);
    }

    #[test]
    fn fm_is_exactly_symmetric() {
        let s = space1();
        let a = EmpiricalMeasure::from_points(
            &s,
            &[(vec![0.1], 0.3), (vec![0.9], 0.45), (vec![1.7], 0.25)],
        )
        .unwrap();
        let b =
            EmpiricalMeasure::from_points(&s, &[(vec![0.4], 0.6), (vec![2.2], 0.4)]).unwrap();
        let ab = fm_distance(&a, &b).unwrap().value;
        let ba = fm_distance(&b, &a).unwrap().value;
        assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn witness_is_feasible_and_attains_the_value() {
        let s = space1();
        let a = EmpiricalMeasure::from_points(
            &s,
            &[(vec![0.0], 0.2), (vec![0.5], 0.5), (vec![3.0], 0.3)],
        )
        .unwrap();
        let b =
            EmpiricalMeasure::from_points(&s, &[(vec![0.25], 0.5), (vec![4.0], 0.5)]).unwrap();
        let r = fm_distance(&a, &b).unwrap();
        for (i, fi) in r.witness.iter().enumerate() {
            assert!(fi.abs() <= 1.0 + 1e-8);
            for (j, fj) in r.witness.iter().enumerate() {
                let d = hybrid_distance(&r.support[i], &r.support[j], &s)
                    - f64::from(u8::from(!r.hybrid)) * 0.0;
                assert!((fi - fj).abs() <= d + 1e-8);
            }
        }
        let objective: f64 = r
            .support
            .iter()
            .zip(&r.witness)
            .map(|(z, f)| {
                let w1: f64 = a
                    .atoms()
                    .filter(|(x, _, _)| x == &z.x.as_slice())
                    .map(|(_, _, w)| w)
                    .sum();
                let w2: f64 = b
                    .atoms()
                    .filter(|(x, _, _)| x == &z.x.as_slice())
                    .map(|(_, _, w)| w)
                    .sum();
                (w1 - w2) * f
            })
            .sum();
        assert!((objective - r.value).abs() < 1e-9, "witness gap {}", objective - r.value);
    }

    #[test]
    fn merge_invariant_value() {
        let s = space1();
        let split = EmpiricalMeasure::from_points(
            &s,
            &[(vec![1.0], 0.25), (vec![1.0], 0.25), (vec![0.0], 0.5)],
        )
        .unwrap();
        let merged =
            EmpiricalMeasure::from_points(&s, &[(vec![1.0], 0.5), (vec![0.0], 0.5)]).unwrap();
        let probe = EmpiricalMeasure::dirac_point(&s, vec![0.3]).unwrap();
        let v1 = fm_distance(&split, &probe).unwrap().value;
        let v2 = fm_distance(&merged, &probe).unwrap().value;
        assert!((v1 - v2).abs() < 1e-9);
    }

    #[test]
    fn support_cap_is_enforced() {
        let s = space1();
        let n = SUPPORT_CAP / 2 + 1;
        let atoms: Vec<(Vec<f64>, f64)> =
            (0..n).map(|k| (vec![k as f64], 1.0 / n as f64)).collect();
        let shifted: Vec<(Vec<f64>, f64)> =
            (0..n).map(|k| (vec![k as f64 + 0.5], 1.0 / n as f64)).collect();
        let a = EmpiricalMeasure::from_points(&s, &atoms).unwrap();
        let b = EmpiricalMeasure::from_points(&s, &shifted).unwrap();
        assert!(matches!(fm_distance(&a, &b), Err(Error::Capacity(_))));
    }

    #[test]
    fn hybrid_and_plain_measures_do_not_mix() {
        let s = space1();
        let plain = EmpiricalMeasure::dirac_point(&s, vec![0.0]).unwrap();
        let hybrid = EmpiricalMeasure::dirac_state(&s, HybridState::new(vec![0.0], 0)).unwrap();
        assert!(fm_distance(&plain, &hybrid).is_err());
    }

    #[test]
    fn grid_oracle_hand_values() {
        let s = space1();
        let d0 = EmpiricalMeasure::dirac_point(&s, vec![0.0]).unwrap();
        let d3 = EmpiricalMeasure::dirac_point(&s, vec![3.0]).unwrap();
        let dh = EmpiricalMeasure::dirac_point(&s, vec![0.5]).unwrap();
        assert!((fm_oracle_grid(&d0, &d0, 1e-2).unwrap()).abs() < 1e-12);
        assert!((fm_oracle_grid(&d0, &d3, 1e-2).unwrap() - 2.0).abs() < 0.05);
        assert!((fm_oracle_grid(&d0, &dh, 1e-2).unwrap() - 0.5).abs() < 0.03);
    }

    #[test]
    fn grid_oracle_endpoint_trick_matches_full_enumeration() {
        // same objective maximized with the third coordinate enumerated
        // over the grid instead of placed at its interval endpoint
        let s = space1();
        let mut state = 0xfeed_5eedu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..5 {
            let a = EmpiricalMeasure::from_points(
                &s,
                &[(vec![next() * 2.0], 0.4), (vec![next() * 2.0], 0.6)],
            )
            .unwrap();
            let b = EmpiricalMeasure::dirac_point(&s, vec![next() * 2.0]).unwrap();
            let fast = fm_oracle_grid(&a, &b, 1e-2).unwrap();

            let mut support: Vec<Vec<f64>> = Vec::new();
            let mut c: Vec<f64> = Vec::new();
            for (measure, sign) in [(&a, 1.0), (&b, -1.0)] {
                for (x, _, w) in measure.atoms() {
                    if let Some(k) = support.iter().position(|z| z.as_slice() == x) {
                        c[k] += sign * w;
                    } else {
                        support.push(x.to_vec());
                        c.push(sign * w);
                    }
                }
            }
            let grid: Vec<f64> = (0..=200).map(|k| -1.0 + k as f64 * 0.01).collect();
            let d = |i: usize, j: usize| s.distance(&support[i], &support[j]);
            let mut slow = f64::NEG_INFINITY;
            for &f0 in &grid {
                for &f1 in &grid {
                    if (f0 - f1).abs() > d(0, 1) {
                        continue;
                    }
                    for &f2 in &grid {
                        if (f0 - f2).abs() > d(0, 2) || (f1 - f2).abs() > d(1, 2) {
                            continue;
                        }
                        slow = slow.max(c[0] * f0 + c[1] * f1 + c[2] * f2);
                    }
                }
            }
            assert!(
                (fast - slow).abs() < 1e-9 + 0.01,
                "endpoint {fast} vs enumerated {slow}"
            );
        }
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let s = space1();
        let states = vec![
            HybridState::new(vec![1.0 / 3.0], 0),
            HybridState::new(vec![-0.257], 1),
            HybridState::new(vec![5.5e-13], 0),
        ];
        let mu = EmpiricalMeasure::from_states(&s, &states).unwrap();
        let text = mu.to_csv();
        let back = EmpiricalMeasure::from_csv(&s, &text).unwrap();
        assert_eq!(mu, back);
        assert_eq!(text, back.to_csv());

        let plain =
            EmpiricalMeasure::from_points(&s, &[(vec![0.1], 0.5), (vec![0.2], 0.5)]).unwrap();
        let back = EmpiricalMeasure::from_csv(&s, &plain.to_csv()).unwrap();
        assert_eq!(plain, back);
    }
}
