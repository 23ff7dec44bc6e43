//! Comparison methods: perfect-CSI bounds, estimate-then-optimize
//! pipelines, and the two sampling-based blind beamformers.

use thiserror::Error;

use crate::oracle::{OracleError, ReconfigVariable};

mod ls;
mod omp;
mod pbf;
mod po;
mod sampling;

pub use ls::{dft_probe_book, ls_estimate_then_pbf, LsOutcome};
pub use omp::{omp_estimate, AngleGrid, OmpOutcome};
pub use pbf::pbf_perfect;
pub use po::{po_grid, GridSearch};
pub use sampling::{csm, csm_select, rms, DiscretePhaseBook, RmsOutcome, RmsSampler};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("invalid baseline input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// What a method hands back to the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: String,
    pub queries_used: usize,
    pub variable: ReconfigVariable,
    /// Noiseless `P |H|^2` at `variable`.
    pub achieved_power: f64,
}
