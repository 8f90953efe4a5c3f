//! File formats, plots and the command-line front end for `qfcn-core`.

pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod report;
pub mod svg;
pub mod trace_csv;

pub use commands::{run_command, run_with_io, CliError};
