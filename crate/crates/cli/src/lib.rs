//! Command-line front end: strict configuration, run orchestration with
//! snapshot and CSV output, and the verification subcommands.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_check_grad, cmd_gauge_verify, cmd_run, cmd_scan, gauge_verify, ScanOptions, Status};
pub use config::{parse_config, parse_config_str, CheckSpec, RunConfig};
pub use manifest::{diagnostics_csv, RunManifest};
