//! Experiment plumbing: instance generation, configuration, runs and sweeps.

mod config;
mod experiment;
mod generate;
mod sweep;

pub use config::{ess_config, Algorithm, Budget, ExperimentConfig, MapSource, RawConfig};
pub use experiment::{evaluate, learner_seed, run_experiment, run_on_map, train_model, Model, Trained};
pub use generate::{default_goal_count, gen_map, MapSpec, MAX_ATTEMPTS};
pub use sweep::{cell_seed, report_csv, run_sweep, Axis, SweepOutput, SweepRow, SweepSpec, CSV_HEADER};
