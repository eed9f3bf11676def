//! Exclusion processes on the discrete torus and their hydrodynamic limits.
//!
//! * [`lattice`], [`rates`], [`engine`]: n-species exchange dynamics with
//!   exact continuous-time sampling.
//! * [`observables`]: empirical measures, the exponential functional and its
//!   martingale decomposition.
//! * [`hydro`]: finite-difference solvers for the viscous Burgers equation
//!   and the equidiffusive n-species system, plus the weak-form residual.
//! * [`harness`]: ensemble convergence studies, scaling fits and the
//!   generator-matrix oracle.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod harness;
pub mod hydro;
pub mod lattice;
pub mod meta;
pub mod observables;
pub mod profile;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
pub use lattice::LatticeConfig;
pub use profile::{InitialProfile, Profile};
pub use rates::RateTable;
