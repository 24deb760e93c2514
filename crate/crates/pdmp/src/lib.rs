//! Simulation and verification toolkit for randomly switched dynamical
//! systems with jumps.
//!
//! A system here is a finite family of semiflows and jump maps on a common
//! metric space, with position-dependent switching probabilities and an
//! exponential clock. Between clock ticks the position follows one flow; at
//! a tick it is relocated by a jump map; which flow drives the next segment
//! and which map fires are drawn at the relevant positions. The crate
//! samples the embedded chain of post-jump states, evaluates the transition
//! operator and its dual, builds an explicit coupling of two chain copies,
//! computes bounded-Lipschitz (Fortet-Mourier) distances between empirical
//! measures with an exact transport solver, and packages diagnostics for
//! contraction conditions, invariant-measure estimation, ergodic averages,
//! and geometric convergence rates.
//!
//! Everything downstream of a seed is deterministic: samplers take explicit
//! (seed, stream) pairs, parallel ensembles assign one stream per
//! trajectory, and results are bitwise independent of the worker count.

pub mod analysis;
pub mod coupling;
pub mod error;
pub mod measure;
pub mod model;
pub mod models;
pub mod operator;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod space;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};

/// Crate version, for embedding in run artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
