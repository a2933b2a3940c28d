//! Unimodular slow-time code design by ambiguity function shaping.
//!
//! The crate minimizes the energy of a code's cyclic discrete ambiguity
//! function over a chosen set of delay lags and Doppler bins. The quartic
//! objective is recast, through a Hermitian split of each AF kernel,
//! diagonal loading and Hermitian square roots, into a problem that is
//! quadratic in the code and in a set of auxiliary unit vectors. The solver
//! alternates power-method-like iterations for the code with closed-form
//! updates of the auxiliary vectors.
//!
//! ```no_run
//! use afshape::{af::RegionSpec, solver::{run, SolverConfig}};
//!
//! let region = RegionSpec::new(31, [5, 6, 7], [-15, -14, -13, 11, 12, 13, 14])?;
//! let outcome = run(&SolverConfig::new(region))?;
//! println!("C: {} -> {}", outcome.trace.initial_c(), outcome.trace.final_c());
//! # Ok::<(), afshape::Error>(())
//! ```

pub mod af;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod reformulation;
pub mod solver;

pub use error::{Error, Result};
