//! Command-line front end for the anonymity sweeps: configuration files,
//! CSV/JSON output and the built-in self test.

pub mod config;
pub mod output;
pub mod run;
pub mod selftest;

pub use config::{parse_config, ConfigError, OutputFormat, RunConfig};
pub use output::{fmt_g9, to_csv, to_json, CSV_HEADER};
pub use run::{cmd_run, cmd_selftest, RunOverrides};
