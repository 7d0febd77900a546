//! Monte Carlo experiment driver: configuration, sweeps and CSV output.

pub mod config;
pub mod results;
pub mod sweep;

pub use config::{dbm_to_watts, watts_to_dbm, ExperimentConfig};
pub use results::{read_results, summarize, write_results, Axis, CellSummary, SweepRecord};
pub use sweep::{run_element_sweep, run_experiment, run_experiment_with_threads, run_power_sweep, Execution, Experiment};
