//! Experiment harness: configuration, runners, result records, and their
//! CSV/JSON encodings. The library stays I/O-free except for the explicit
//! read/write entry points here; the `schoenbat` binary is a thin argument
//! parser over this module.

pub mod config;
pub mod csv;
pub mod experiments;
pub mod stats;
pub mod timing;

pub use config::{parse_config, parse_config_for, parse_config_str, Experiment, ExperimentConfig};
pub use csv::{
    emit_csv, emit_json, parse_csv, strip_wall_times, write_csv, ResultRecord, CSV_HEADER,
};
pub use experiments::{
    run, run_demo, run_error_sweep, run_speed_sweep, run_tail_bound, run_unbiasedness,
};
