//! Command-line front end: maps subcommands one-to-one onto library
//! operations and writes every run's artifacts plus a manifest that
//! reproduces it.
//!
//! Exit codes: 0 success, 1 runtime error, 2 a check or validation that
//! ran to completion and failed, 64 usage, 78 malformed configuration.
//! Artifacts are a pure function of (config, seed): no timestamps, no
//! thread-count dependence.

mod obs;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

const EXIT_RUNTIME: u8 = 1;
const EXIT_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_CONFIG: u8 = 78;

#[derive(Debug)]
pub enum CliError {
    /// Missing or contradictory settings, unreadable model or input files.
    Config(String),
    /// The run itself broke: sampling, numerics, io.
    Runtime(String),
    /// The operation completed and its verdict is negative.
    Failed(String),
}

impl From<pdmp::Error> for CliError {
    fn from(e: pdmp::Error) -> Self {
        match e {
            pdmp::Error::Config(_) | pdmp::Error::Parse(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "pdmp",
    version,
    about = "Switched-flow jump systems: simulate, couple, measure, check"
)]
struct Cli {
    /// JSON config file; its settings override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in model name or path to a model JSON file.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Jump intensity of the exponential clock.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Master seed; required, never defaulted from the clock.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; affects wall time only, never output bytes.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Probe the model's structural and probabilistic requirements.
    Validate(ValidateArgs),
    /// Sample one chain of post-jump states.
    Simulate(SimulateArgs),
    /// Estimate the long-run occupation measure from one chain.
    Invariant(InvariantArgs),
    /// Running ergodic averages against the occupation-measure integral.
    Lln(LlnArgs),
    /// Coupled chains from random pairs and their contraction ratios.
    Couple(CoupleArgs),
    /// Distance between two stored measures.
    Fm(FmArgs),
    /// Contraction criterion, time window, and overlap scan.
    Check(CheckArgs),
    /// Fit a geometric envelope to ensemble distance curves.
    Rate(RateArgs),
}

// Every command-specific field is optional at parse time so a config file
// can fill or override it; defaults land in `run` once merging is done.

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    /// Probe points per check.
    #[arg(long)]
    n_probe: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Number of transitions.
    #[arg(long)]
    n: Option<usize>,
    /// Start position, comma-separated coordinates.
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    /// Start flow index; drawn from the initial law when absent.
    #[arg(long)]
    xi0: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct InvariantArgs {
    /// Transitions discarded before keeping any state.
    #[arg(long)]
    burn_in: Option<usize>,
    /// States kept.
    #[arg(long)]
    n_keep: Option<usize>,
    /// Keep every thin-th state.
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    xi0: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct LlnArgs {
    /// Observable: one | coord:k | min:k:c | clip:k:lo:hi | gauss:k:mu:sigma.
    #[arg(long)]
    f: Option<String>,
    /// Chain length per seed.
    #[arg(long)]
    n: Option<usize>,
    /// Steps at which the running average is recorded.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    /// One chain per seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    xi0: Option<usize>,
    /// Reference measure CSV; estimated on the spot when absent.
    #[arg(long)]
    invariant: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct CoupleArgs {
    /// Number of random start pairs.
    #[arg(long)]
    pairs: Option<usize>,
    /// Coupled transitions per chain.
    #[arg(long)]
    n_steps: Option<usize>,
    /// Chains per pair.
    #[arg(long)]
    n_rep: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct FmArgs {
    /// First measure CSV.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Second measure CSV.
    #[arg(long)]
    b: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct CheckArgs {
    /// Random pairs per scan.
    #[arg(long)]
    n_pairs: Option<usize>,
    /// Time draws per pair in the overlap scan.
    #[arg(long)]
    t_samples: Option<usize>,
    /// Probe times for constant estimation when the model declares none.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
}

#[derive(Args, Serialize, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct RateArgs {
    /// Trajectories per ensemble.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Largest step count measured.
    #[arg(long)]
    n_max: Option<usize>,
    /// Support cap per measure in each distance solve.
    #[arg(long)]
    fm_cap: Option<usize>,
    /// First start position.
    #[arg(long, value_delimiter = ',')]
    xa: Option<Vec<f64>>,
    /// First start flow.
    #[arg(long)]
    ia: Option<usize>,
    /// Second start position.
    #[arg(long, value_delimiter = ',')]
    xb: Option<Vec<f64>>,
    /// Second start flow.
    #[arg(long)]
    ib: Option<usize>,
}

/// Config-file image of the full flag surface. Top-level settings override
/// global flags; command blocks override command flags field by field.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    lambda: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    validate: Option<ValidateArgs>,
    simulate: Option<SimulateArgs>,
    invariant: Option<InvariantArgs>,
    lln: Option<LlnArgs>,
    couple: Option<CoupleArgs>,
    fm: Option<FmArgs>,
    check: Option<CheckArgs>,
    rate: Option<RateArgs>,
}

/// Merged settings every command starts from.
pub struct Globals {
    pub model: Option<String>,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
}

fn overlay<T: Clone>(flag: &mut Option<T>, file: &Option<T>) {
    if let Some(v) = file {
        *flag = Some(v.clone());
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn execute(mut cli: Cli) -> Result<(), CliError> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    overlay(&mut cli.model, &file.model);
    overlay(&mut cli.lambda, &file.lambda);
    overlay(&mut cli.seed, &file.seed);
    overlay(&mut cli.out, &file.out);
    overlay(&mut cli.threads, &file.threads);

    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        // Build errors only when a pool already exists (as under repeated
        // in-process calls); the existing pool then serves the run.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let globals = Globals {
        model: cli.model,
        lambda: cli.lambda,
        seed: cli.seed.ok_or_else(|| {
            CliError::Config("seed is required; pass --seed or set it in the config".into())
        })?,
        out: cli.out.unwrap_or_else(|| PathBuf::from("out")),
    };

    let (name, params, outcome) = match cli.command {
        Command::Validate(mut a) => {
            merge_block(&mut a, &file.validate);
            ("validate", to_params(&a)?, run::validate(&globals, &a)?)
        }
        Command::Simulate(mut a) => {
            merge_block(&mut a, &file.simulate);
            ("simulate", to_params(&a)?, run::simulate(&globals, &a)?)
        }
        Command::Invariant(mut a) => {
            merge_block(&mut a, &file.invariant);
            ("invariant", to_params(&a)?, run::invariant(&globals, &a)?)
        }
        Command::Lln(mut a) => {
            merge_block(&mut a, &file.lln);
            ("lln", to_params(&a)?, run::lln(&globals, &a)?)
        }
        Command::Couple(mut a) => {
            merge_block(&mut a, &file.couple);
            ("couple", to_params(&a)?, run::couple(&globals, &a)?)
        }
        Command::Fm(mut a) => {
            merge_block(&mut a, &file.fm);
            ("fm", to_params(&a)?, run::fm(&globals, &a)?)
        }
        Command::Check(mut a) => {
            merge_block(&mut a, &file.check);
            ("check", to_params(&a)?, run::check(&globals, &a)?)
        }
        Command::Rate(mut a) => {
            merge_block(&mut a, &file.rate);
            ("rate", to_params(&a)?, run::rate(&globals, &a)?)
        }
    };

    write_artifacts(&globals, name, params, &outcome)?;
    match outcome.failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

/// Field-by-field overlay of a config block onto the matching flag block.
fn merge_block<T: MergeInto>(flags: &mut T, file: &Option<T>) {
    if let Some(block) = file {
        flags.merge_from(block);
    }
}

pub trait MergeInto {
    fn merge_from(&mut self, file: &Self);
}

macro_rules! merge_fields {
    ($ty:ty, $($field:ident),+) => {
        impl MergeInto for $ty {
            fn merge_from(&mut self, file: &Self) {
                $(overlay(&mut self.$field, &file.$field);)+
            }
        }
    };
}

merge_fields!(ValidateArgs, n_probe);
merge_fields!(SimulateArgs, n, x0, xi0);
merge_fields!(InvariantArgs, burn_in, n_keep, thin, x0, xi0);
merge_fields!(LlnArgs, f, n, checkpoints, seeds, x0, xi0, invariant);
merge_fields!(CoupleArgs, pairs, n_steps, n_rep);
merge_fields!(FmArgs, a, b);
merge_fields!(CheckArgs, n_pairs, t_samples, t_grid);
merge_fields!(RateArgs, ensemble, n_max, fm_cap, xa, ia, xb, ib);

fn to_params<T: Serialize>(block: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(block).map_err(|e| CliError::Runtime(e.to_string()))
}

/// What a command produced: files to write under the output directory,
/// the effective settings echoed into the manifest, and a verdict when the
/// operation can fail without erroring.
pub struct Outcome {
    pub files: Vec<(&'static str, String)>,
    /// Effective (post-default) parameters, echoed into the manifest.
    pub effective: serde_json::Value,
    pub failure: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config: ManifestConfig<'a>,
    versions: Versions,
}

#[derive(Serialize)]
struct ManifestConfig<'a> {
    model: &'a Option<String>,
    lambda: Option<f64>,
    seed: u64,
    out: &'a Path,
    /// Parameters as given (nulls where defaults applied).
    given: serde_json::Value,
    /// Parameters actually used, defaults filled in.
    effective: serde_json::Value,
}

#[derive(Serialize)]
struct Versions {
    pdmp: &'static str,
    cli: &'static str,
}

fn write_artifacts(
    globals: &Globals,
    command: &str,
    given: serde_json::Value,
    outcome: &Outcome,
) -> Result<(), CliError> {
    fs::create_dir_all(&globals.out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", globals.out.display())))?;
    let manifest = Manifest {
        command,
        seed: globals.seed,
        config: ManifestConfig {
            model: &globals.model,
            lambda: globals.lambda,
            seed: globals.seed,
            out: &globals.out,
            given,
            effective: outcome.effective.clone(),
        },
        versions: Versions { pdmp: pdmp::VERSION, cli: env!("CARGO_PKG_VERSION") },
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_file(&globals.out, "manifest.json", &text)?;
    for (name, content) in &outcome.files {
        write_file(&globals.out, name, content)?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
