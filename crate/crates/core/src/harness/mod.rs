//! Ensemble studies across system sizes, scaling fits, and the exact
//! generator-matrix oracle for tiny systems.

mod convergence;
mod martingale;
pub mod oracle;
mod plan;
pub mod stats;

use std::fmt;

pub use convergence::{
    bin_reference, dynamics_seed, l1_distance, l2_distance, run_convergence, ConvergenceReport, ConvergenceRow,
};
pub use martingale::{
    martingale_run, run_martingale_scaling, MartingaleRow, MartingaleRun, MartingaleScaling, MartingaleStudy,
    ScalingStatus, VAR_SLOPE_RANGE,
};
pub use oracle::{run_generator_oracle, Driver, Generator, OracleReport};
pub use plan::{ExperimentPlan, ModelSpec};

/// Named pass/fail outcome with the numbers behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), pass, detail: detail.into() }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}
