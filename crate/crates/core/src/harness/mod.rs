//! Monte Carlo experiments and their result files.

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{ExperimentConfig, MmsCoding, SigmaSetting, SpectrumSource};
pub use report::{emit_report, load_result};
pub use sweep::{
    calibrate_sigma, run_sweep, run_trial, run_trial_detailed, trial_measurements, BoundAggregate,
    Experiment, MethodSummary, SweepResult, TrialOutcome,
};
