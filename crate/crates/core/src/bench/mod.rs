//! Experiment orchestration: configuration, Monte Carlo scheme comparison
//! and report files.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{EvalWind, ExperimentConfig, RateModel, Scheme, SweepAxis};
pub use experiment::{compare_schemes, run_experiment, run_experiment_with, PlanCache, Comparison, EEReport, RunMetrics, RunRecord, RunSeeds, Stat, SummaryRow};
