//! One function per subcommand. Each resolves defaults, runs the mapped
//! library operation, and returns artifacts plus the effective settings;
//! writing and exit codes stay in main.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use pdmp::analysis::{
    check_contraction_criterion, check_s1, contraction_window, estimate_constants,
    estimate_invariant, lln_run, rate_fit,
};
use pdmp::coupling::{coupling_contraction_estimate, run_coupled_chain};
use pdmp::measure::{fm_distance, EmpiricalMeasure};
use pdmp::model::SystemSpec;
use pdmp::models;
use pdmp::quad::QuadratureSpec;
use pdmp::rng::{stream_rng, UniformSource};
use pdmp::sim::{draw_initial_flow, sample_chain};
use pdmp::space::HybridState;
use pdmp::stats::mean_stderr;
use pdmp::validate::validate_system;

use crate::{
    CheckArgs, CliError, CoupleArgs, FmArgs, Globals, InvariantArgs, LlnArgs, Outcome, RateArgs,
    SimulateArgs, ValidateArgs,
};
use crate::obs;

/// Stream reserved for drawing a missing start flow; chains run on stream 0.
const INIT_FLOW_STREAM: u64 = 1;
/// Stream reserved for generating random start pairs, far above the
/// per-replica streams the coupled runs consume.
const PAIR_STREAM: u64 = 1 << 40;

fn load_spec(globals: &Globals) -> Result<SystemSpec, CliError> {
    let name = globals
        .model
        .as_deref()
        .ok_or_else(|| CliError::Config("model is required; pass --model".into()))?;
    if models::REGISTRY.contains(&name) {
        let lambda = globals.lambda.ok_or_else(|| {
            CliError::Config(format!("built-in model '{name}' needs --lambda"))
        })?;
        return Ok(models::by_name(name, lambda)?);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "model '{name}' is neither a built-in ({}) nor a readable file",
            models::REGISTRY.join(", ")
        )));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    let mut spec = models::from_json(&text)?;
    if let Some(lambda) = globals.lambda {
        spec.lambda = lambda;
        spec.check_structure()?;
    }
    Ok(spec)
}

fn start_position(x0: &Option<Vec<f64>>, spec: &SystemSpec) -> Result<Vec<f64>, CliError> {
    match x0 {
        Some(x) => {
            if x.len() != spec.space.dimension {
                return Err(CliError::Config(format!(
                    "x0 has {} coordinates, model has {}",
                    x.len(),
                    spec.space.dimension
                )));
            }
            Ok(x.clone())
        }
        None => Ok(vec![0.0; spec.space.dimension]),
    }
}

fn json_text<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn validate(globals: &Globals, args: &ValidateArgs) -> Result<Outcome, CliError> {
    let spec = load_spec(globals)?;
    let n_probe = args.n_probe.unwrap_or(200);
    let report = validate_system(&spec, n_probe, globals.seed)?;
    let failure = if report.passed() {
        None
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        Some(format!("model failed checks: {}", failed.join(", ")))
    };
    Ok(Outcome {
        files: vec![("validation.json", json_text(&report)?)],
        effective: json!({ "n_probe": n_probe }),
        failure,
    })
}

pub fn simulate(globals: &Globals, args: &SimulateArgs) -> Result<Outcome, CliError> {
    let spec = load_spec(globals)?;
    let n = args.n.unwrap_or(1000);
    let x0 = start_position(&args.x0, &spec)?;
    let xi0 = match args.xi0 {
        Some(i) => i,
        None => {
            let mut rng = stream_rng(globals.seed, INIT_FLOW_STREAM);
            draw_initial_flow(&spec, &x0, &mut rng)?
        }
    };
    let chain = sample_chain(&spec, &x0, xi0, n, globals.seed, 0)?;
    Ok(Outcome {
        files: vec![("trajectory.csv", chain.to_csv())],
        effective: json!({ "n": n, "x0": x0, "xi0": xi0 }),
        failure: None,
    })
}

pub fn invariant(globals: &Globals, args: &InvariantArgs) -> Result<Outcome, CliError> {
    let spec = load_spec(globals)?;
    let burn_in = args.burn_in.unwrap_or(1000);
    let n_keep = args.n_keep.unwrap_or(100_000);
    let thin = args.thin.unwrap_or(1);
    let x0 = start_position(&args.x0, &spec)?;
    let mu = estimate_invariant(&spec, burn_in, n_keep, thin, &x0, args.xi0, globals.seed)?;

    let dim = spec.space.dimension;
    let means: Vec<f64> = (0..dim).map(|k| mu.integrate(|s| s.x[k])).collect();
    let flow_freq: Vec<f64> = (0..spec.n_flows())
        .map(|j| mu.integrate(|s| if s.flow == j { 1.0 } else { 0.0 }))
        .collect();
    let summary = json!({
        "atoms": mu.n_atoms(),
        "coordinate_means": means,
        "flow_frequencies": flow_freq,
    });
    Ok(Outcome {
        files: vec![
            ("invariant.csv", mu.to_csv()),
            ("invariant.json", json_text(&summary)?),
        ],
        effective: json!({
            "burn_in": burn_in, "n_keep": n_keep, "thin": thin,
            "x0": x0, "xi0": args.xi0,
        }),
        failure: None,
    })
}

pub fn lln(globals: &Globals, args: &LlnArgs) -> Result<Outcome, CliError> {
    let spec = load_spec(globals)?;
    let f_spec = args.f.clone().unwrap_or_else(|| "coord:0".into());
    let observable = obs::parse(&f_spec, spec.space.dimension)?;
    let n = args.n.unwrap_or(100_000);
    let checkpoints = match &args.checkpoints {
        Some(c) => c.clone(),
        None => {
            let mut c: Vec<usize> =
                [n / 1000, n / 100, n / 10, n].into_iter().filter(|&k| k > 0).collect();
            c.dedup();
            c
        }
    };
    let seeds: Vec<u64> = args.seeds.clone().unwrap_or_else(|| (1..=10).collect());
    let x0 = start_position(&args.x0, &spec)?;

    let reference = match &args.invariant {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            EmpiricalMeasure::from_csv(&spec.space, &text)?
        }
        None => estimate_invariant(&spec, 1000, 100_000, 1, &x0, args.xi0, globals.seed + 1)?,
    };

    let report = lln_run(
        &spec,
        &observable.f,
        &x0,
        args.xi0,
        n,
        &checkpoints,
        &seeds,
        &reference,
    )?;

    let mut curve = String::from("n,value,stderr\n");
    for (col, &cp) in report.checkpoints.iter().enumerate() {
        let at_cp: Vec<f64> = report.per_seed.iter().map(|row| row[col]).collect();
        let (mean, se) = mean_stderr(&at_cp);
        let _ = writeln!(curve, "{cp},{mean},{se}");
    }

    let body = json!({
        "observable": observable.meta,
        "report": report,
    });
    Ok(Outcome {
        files: vec![("lln.json", json_text(&body)?), ("lln.csv", curve)],
        effective: json!({
            "f": f_spec, "n": n, "checkpoints": checkpoints, "seeds": seeds,
            "x0": x0, "xi0": args.xi0,
            "invariant": args.invariant.as_ref().map(|p| p.display().to_string()),
        }),
        failure: None,
    })
}

pub fn couple(globals: &Globals, args: &CoupleArgs) -> Result<Outcome, CliError> {
    let spec = load_spec(globals)?;
    let n_pairs = args.pairs.unwrap_or(100);
    let n_steps = args.n_steps.unwrap_or(10);
    let n_rep = args.n_rep.unwrap_or(100);
    if n_pairs == 0 {
        return Err(CliError::Config("couple needs at least one pair".into()));
    }

    let radius = spec.space.bounded_hint.unwrap_or(3.0);
    let mut rng = stream_rng(globals.seed, PAIR_STREAM);
    let draw_state = |rng: &mut dyn UniformSource| {
        let x: Vec<f64> =
            (0..spec.space.dimension).map(|_| radius * (2.0 * rng.uniform() - 1.0)).collect();
        HybridState::new(x, (rng.uniform() * spec.n_flows() as f64) as usize)
    };
    let pairs: Vec<(HybridState, HybridState)> = (0..n_pairs)
        .map(|_| loop {
            let (a, b) = (draw_state(&mut rng), draw_state(&mut rng));
            if a != b {
                return (a, b);
            }
        })
        .collect();

    let estimate = coupling_contraction_estimate(&spec, &pairs, n_steps, n_rep, globals.seed)?;
    // The trace chain reruns replica (pair 0, repeat 0), stream 0.
    let trace = run_coupled_chain(&spec, &pairs[0].0, &pairs[0].1, n_steps, globals.seed, 0)?;

    let body = json!({
        "pairs": n_pairs,
        "n_steps": n_steps,
        "n_rep": n_rep,
        "estimate": estimate,
    });
    Ok(Outcome {
        files: vec![("couple.json", json_text(&body)?), ("couple.csv", trace.to_csv())],
        effective: json!({ "pairs": n_pairs, "n_steps": n_steps, "n_rep": n_rep }),
        failure: None,
    })
}

/// Dimension and index column read off a measure CSV header.
fn sniff_header(text: &str, label: &str) -> Result<usize, CliError> {
    let header = text
        .lines()
        .next()
        .ok_or_else(|| CliError::Config(format!("{label}: empty measure file")))?;
    let cols: Vec<&str> = header.split(',').collect();
    let hybrid = cols.last() == Some(&"xi");
    let dim = cols.len().saturating_sub(1 + usize::from(hybrid));
    if cols.first() != Some(&"weight") || dim == 0 {
        return Err(CliError::Config(format!(
            "{label}: header '{header}' is not a measure csv"
        )));
    }
    Ok(dim)
}

pub fn fm(globals: &Globals, args: &FmArgs) -> Result<Outcome, CliError> {
    let read = |path: &Option<std::path::PathBuf>, label: &str| -> Result<String, CliError> {
        let path = path
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("fm needs --{label}")))?;
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    };
    let text_a = read(&args.a, "a")?;
    let text_b = read(&args.b, "b")?;
    let dim = sniff_header(&text_a, "a")?;
    let space = pdmp::space::StateSpace::euclidean(dim);
    let mu_a = EmpiricalMeasure::from_csv(&space, &text_a)?;
    let mu_b = EmpiricalMeasure::from_csv(&space, &text_b)?;
    let result = fm_distance(&mu_a, &mu_b)?;

    let body = json!({
        "value": result.value,
        "status": result.status,
        "support_atoms": result.support.len(),
        "hybrid": result.hybrid,
    });
    let _ = globals;
    Ok(Outcome {
        files: vec![("fm.json", json_text(&body)?)],
        effective: json!({
            "a": args.a.as_ref().map(|p| p.display().to_string()),
            "b": args.b.as_ref().map(|p| p.display().to_string()),
        }),
        failure: None,
    })
}

pub fn check(globals: &Globals, args: &CheckArgs) -> Result<Outcome, CliError> {
    let mut spec = load_spec(globals)?;
    let n_pairs = args.n_pairs.unwrap_or(300);
    let t_samples = args.t_samples.unwrap_or(8);
    let t_grid = args
        .t_grid
        .clone()
        .unwrap_or_else(|| vec![0.1, 0.2, 0.4, 0.8, 1.6]);

    let estimated = spec.constants().is_err();
    if estimated {
        let fitted = estimate_constants(&spec, n_pairs.max(100), &t_grid, globals.seed)?;
        spec = spec.with_constants(fitted);
    }

    let quad = QuadratureSpec::default();
    let criterion = check_contraction_criterion(&spec, &quad)?;
    let window = match contraction_window(&spec) {
        Ok(w) => Some(w),
        Err(_) => None,
    };
    let s1 = check_s1(&spec, n_pairs, t_samples, globals.seed + 1)?;

    let body = json!({
        "criterion": criterion,
        "window": window,
        "s1": s1,
        "constants": spec.constants()?,
        "constants_estimated": estimated,
    });
    let failure = if criterion.satisfied {
        None
    } else {
        Some(match &criterion.reason {
            Some(reason) => format!("contraction criterion not met: {reason}"),
            None => format!("contraction criterion not met: lhs = {}", criterion.lhs),
        })
    };
    Ok(Outcome {
        files: vec![("check.json", json_text(&body)?)],
        effective: json!({
            "n_pairs": n_pairs, "t_samples": t_samples, "t_grid": t_grid,
        }),
        failure,
    })
}

pub fn rate(globals: &Globals, args: &RateArgs) -> Result<Outcome, CliError> {
    let spec = load_spec(globals)?;
    let ensemble = args.ensemble.unwrap_or(10_000);
    let n_max = args.n_max.unwrap_or(20);
    let fm_cap = args.fm_cap.unwrap_or(1000);
    let dim = spec.space.dimension;
    let xa = args.xa.clone().unwrap_or_else(|| vec![0.0; dim]);
    let xb = args.xb.clone().unwrap_or_else(|| vec![1.0; dim]);
    let ia = args.ia.unwrap_or(0);
    let ib = args.ib.unwrap_or(spec.n_flows() - 1);
    for (x, label) in [(&xa, "xa"), (&xb, "xb")] {
        if x.len() != dim {
            return Err(CliError::Config(format!(
                "{label} has {} coordinates, model has {dim}",
                x.len()
            )));
        }
    }

    let mu_a = EmpiricalMeasure::dirac_state(&spec.space, HybridState::new(xa.clone(), ia))?;
    let mu_b = EmpiricalMeasure::dirac_state(&spec.space, HybridState::new(xb.clone(), ib))?;
    let fit = rate_fit(&spec, &mu_a, &mu_b, n_max, ensemble, fm_cap, globals.seed)?;

    // The stderr column carries the replica noise floor: the resolution
    // limit of every distance in the curve.
    let mut curve = String::from("n,value,stderr\n");
    for (&step, &d) in fit.steps.iter().zip(&fit.distances) {
        let _ = writeln!(curve, "{step},{d},{}", fit.noise_floor);
    }

    Ok(Outcome {
        files: vec![("rate.json", json_text(&fit)?), ("rate.csv", curve)],
        effective: json!({
            "ensemble": ensemble, "n_max": n_max, "fm_cap": fm_cap,
            "xa": xa, "ia": ia, "xb": xb, "ib": ib,
        }),
        failure: None,
    })
}
