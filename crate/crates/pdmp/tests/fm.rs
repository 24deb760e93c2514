//! Distance computation against the brute-force oracle and the metric
//! axioms, at supports small enough for exhaustive checking.

mod support;

use pdmp::analysis::estimate_invariant;
use pdmp::measure::{fm_distance, fm_oracle_grid, subsample, EmpiricalMeasure};
use pdmp::models;
use pdmp::rng::{stream_rng, UniformSource};
use pdmp::space::{hybrid_distance, HybridState, StateSpace};

/// Up to `max_atoms` atoms at locations drawn from `slots`, normalized.
fn measure_on_slots(
    space: &StateSpace,
    slots: &[f64],
    max_atoms: usize,
    rng: &mut impl UniformSource,
) -> EmpiricalMeasure {
    let n = 1 + (rng.uniform() * max_atoms as f64) as usize;
    let mut picked = Vec::new();
    while picked.len() < n.min(slots.len()) {
        let s = slots[(rng.uniform() * slots.len() as f64) as usize];
        if !picked.contains(&s) {
            picked.push(s);
        }
    }
    let raw: Vec<f64> = picked.iter().map(|_| rng.uniform() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let atoms: Vec<(Vec<f64>, f64)> = picked
        .iter()
        .zip(&raw)
        .map(|(&x, &w)| (vec![x], w / total))
        .collect();
    EmpiricalMeasure::from_points(space, &atoms).unwrap()
}

#[test]
fn lp_matches_the_grid_oracle_on_tiny_supports() {
    let space = StateSpace::euclidean(1);
    let mut rng = stream_rng(20, 0);
    let mut worst: f64 = 0.0;
    for pair in 0..50 {
        // Three slots shared by both measures keep the merged support at
        // three atoms, the largest the oracle enumerates.
        let slots = [
            4.0 * rng.uniform() - 2.0,
            4.0 * rng.uniform() - 2.0,
            4.0 * rng.uniform() - 2.0,
        ];
        let a = measure_on_slots(&space, &slots, 3, &mut rng);
        let b = measure_on_slots(&space, &slots, 3, &mut rng);

        let lp = fm_distance(&a, &b).unwrap().value;
        let oracle = fm_oracle_grid(&a, &b, 2.5e-4).unwrap();
        assert!(
            oracle <= lp + 1e-9,
            "pair {pair}: grid search {oracle} beat the solver {lp}"
        );
        assert!(
            lp - oracle <= 1e-3,
            "pair {pair}: solver {lp} vs oracle {oracle}"
        );
        worst = worst.max(lp - oracle);
    }
    println!("largest solver-oracle gap over 50 pairs: {worst:.2e}");
}

#[test]
fn dirac_distance_is_the_truncated_metric() {
    let space = StateSpace::euclidean(2);
    let mut rng = stream_rng(21, 0);
    for _ in 0..100 {
        let mut draw = || {
            HybridState::new(
                vec![6.0 * rng.uniform() - 3.0, 6.0 * rng.uniform() - 3.0],
                (rng.uniform() * 3.0) as usize,
            )
        };
        let (sx, sy) = (draw(), draw());
        let expected = hybrid_distance(&sx, &sy, &space).min(2.0);
        let dx = EmpiricalMeasure::dirac_state(&space, sx).unwrap();
        let dy = EmpiricalMeasure::dirac_state(&space, sy).unwrap();
        let got = fm_distance(&dx, &dy).unwrap().value;
        assert!(
            (got - expected).abs() <= 1e-6,
            "dirac distance {got} vs metric {expected}"
        );
    }
}

#[test]
fn distances_satisfy_metric_axioms() {
    let space = StateSpace::euclidean(1);
    let mut rng = stream_rng(22, 0);
    for trial in 0..100 {
        let slots: Vec<f64> = (0..4).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        let mu = measure_on_slots(&space, &slots, 3, &mut rng);
        let nu = measure_on_slots(&space, &slots, 3, &mut rng);
        let pi = measure_on_slots(&space, &slots, 3, &mut rng);

        let d_mn = fm_distance(&mu, &nu).unwrap().value;
        let d_nm = fm_distance(&nu, &mu).unwrap().value;
        let d_mp = fm_distance(&mu, &pi).unwrap().value;
        let d_pn = fm_distance(&pi, &nu).unwrap().value;

        assert!(d_mn >= 0.0);
        assert_eq!(d_mn, d_nm, "trial {trial}: asymmetric");
        assert_eq!(fm_distance(&mu, &mu).unwrap().value, 0.0);
        assert!(
            d_mn <= d_mp + d_pn + 1e-6,
            "trial {trial}: triangle gap {} vs {}",
            d_mn,
            d_mp + d_pn
        );
        if mu == nu {
            assert_eq!(d_mn, 0.0);
        } else if d_mn == 0.0 {
            // zero distance only between equal measures
            assert_eq!(mu.n_atoms(), nu.n_atoms());
        }
    }
}

#[test]
fn atom_order_and_splitting_leave_the_value_alone() {
    let space = StateSpace::euclidean(1);
    let whole = EmpiricalMeasure::from_points(
        &space,
        &[(vec![0.0], 0.5), (vec![1.0], 0.3), (vec![-1.0], 0.2)],
    )
    .unwrap();
    let split = EmpiricalMeasure::from_points(
        &space,
        &[
            (vec![1.0], 0.1),
            (vec![-1.0], 0.2),
            (vec![0.0], 0.25),
            (vec![1.0], 0.2),
            (vec![0.0], 0.25),
        ],
    )
    .unwrap();
    let probe = EmpiricalMeasure::from_points(&space, &[(vec![0.4], 1.0)]).unwrap();

    assert_eq!(fm_distance(&whole, &split).unwrap().value, 0.0);
    let d_whole = fm_distance(&whole, &probe).unwrap().value;
    let d_split = fm_distance(&split, &probe).unwrap().value;
    assert!(
        (d_whole - d_split).abs() <= 1e-9,
        "split representation moved the value: {d_whole} vs {d_split}"
    );
}

#[test]
fn subsampling_stays_close_in_distance() {
    let spec = models::linear1d(1.0, 1.0);
    let mu = estimate_invariant(&spec, 500, 4000, 1, &[0.5], None, 31).unwrap();
    let mut rng = stream_rng(32, 0);
    let thinned = subsample(&mu, 1000, &mut rng).unwrap();
    assert_eq!(thinned.n_atoms() <= 1000, true);
    let gap = fm_distance(&mu, &thinned).unwrap().value;
    assert!(gap <= 0.1, "subsample drifted {gap} from its source");
    println!("subsample of 4000 -> 1000 atoms moved the measure by {gap:.4}");
}

#[test]
fn one_dimensional_values_match_the_sorted_coupling_on_small_diameters() {
    // On supports of diameter under 2 the cap never binds and the value is
    // the classic sorted-atoms transport cost.
    let space = StateSpace::euclidean(1);
    let mut rng = stream_rng(23, 0);
    for _ in 0..20 {
        let xs: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let ys: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let mu = EmpiricalMeasure::from_points(
            &space,
            &xs.iter().map(|&x| (vec![x], 1.0 / 6.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let nu = EmpiricalMeasure::from_points(
            &space,
            &ys.iter().map(|&y| (vec![y], 1.0 / 6.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let lp = fm_distance(&mu, &nu).unwrap().value;
        let weighted =
            |v: &[f64]| v.iter().map(|&x| (x, 1.0 / 6.0)).collect::<Vec<(f64, f64)>>();
        let sorted = support::w1_sorted_1d(&weighted(&xs), &weighted(&ys));
        assert!(
            (lp - sorted).abs() <= 1e-9,
            "solver {lp} vs sorted coupling {sorted}"
        );
    }
}
