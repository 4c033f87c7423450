//! Experiment configuration, parallel trial execution and CSV reporting.
//!
//! Trials run as a parallel map over per-trial derived streams, then reduce
//! in trial-index order, so results do not depend on the worker count.

mod calibrate;
mod config;
mod report;
mod run;

pub use calibrate::{calibrate, fit_exponential_tail, quantile, TailFit, TAIL_MIN_COUNT};
pub use config::{ExperimentConfig, ExperimentKind, StepRuleKind, WORKERS_ENV};
pub use report::{emit_csv, read_csv, Cell, SweepResult, Table};
pub use run::{run_experiment, trial_network, BETA_ETA2, OUTPUT_ETA3, STREAM_BLOCK, WILSON_CONFIDENCE};
