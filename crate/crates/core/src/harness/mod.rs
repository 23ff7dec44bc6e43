//! Paired Monte-Carlo experiments: configuration, execution, aggregation
//! and output.
//!
//! Every method in a trial runs against the same ground-truth channel,
//! regenerated from `base_seed ^ trial`. Pilot noise and method randomness
//! get their own seeds per `(trial, method, budget)`, so a rerun with the
//! same configuration yields byte-identical output.

use std::path::PathBuf;

use thiserror::Error;

mod config;
mod emit;
mod run;
mod summary;

pub use config::{ExperimentConfig, MaSettings, MethodSpec, RisSettings, ZoSettings};
pub use emit::{
    results_from_csv, results_from_json, results_to_csv, results_to_json, summary_from_csv,
    summary_to_csv, write_outputs, OutputFormat, RESULTS_HEADER, SUMMARY_HEADER,
};
pub use run::{
    build_scenario, run_experiment, run_trial, scenario_seed, ResultRow, ResultTable, TrialRun,
};
pub use summary::{summarize, SummaryRow};

use crate::oracle::ScenarioKind;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("method {method} failed at budget {budget}, trial {trial}: {message}")]
    Method {
        method: String,
        budget: usize,
        trial: usize,
        message: String,
    },
    #[error("methods saw different channels in trial {trial}")]
    Unpaired { trial: usize },
    #[error("cannot summarize an empty result table")]
    EmptyTable,
    #[error("malformed output data: {0}")]
    Format(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

const RIS_DEMO: &str = include_str!("../../configs/ris.toml");
const MA_DEMO: &str = include_str!("../../configs/ma.toml");

/// Bundled demonstration configuration for a scenario.
pub fn demo_config(kind: ScenarioKind) -> ExperimentConfig {
    let text = match kind {
        ScenarioKind::Ris => RIS_DEMO,
        ScenarioKind::Ma => MA_DEMO,
    };
    ExperimentConfig::from_toml(text).expect("bundled configs are valid")
}
