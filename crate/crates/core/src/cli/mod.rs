//! Configuration, subcommand drivers and output formats for the
//! `adam-abc` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_experiment, cmd_list_problems, cmd_trace, cmd_verify, exit_code, run_verify, trace_for, CommandOutput,
    VerifyReport, EXIT_FAIL, EXIT_PASS, EXIT_USAGE,
};
pub use config::{parse_config, parse_config_with, serialize_config, Config, Fault};
pub use output::{trace_csv, RunManifest, TRACE_COLUMNS};

use std::path::Path;

use crate::error::{Error, Result};

/// Reads `--config`: a path, or inline text when no such file exists and
/// the argument looks like a config.
pub fn load_config_text(arg: Option<&str>) -> Result<String> {
    let Some(arg) = arg else { return Ok(String::new()) };
    let path = Path::new(arg);
    if path.is_file() {
        return std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{arg}: {e}")));
    }
    if arg.contains('=') || arg.trim_start().starts_with('{') {
        return Ok(arg.replace(';', "\n"));
    }
    Err(Error::Io(format!("{arg}: no such config file")))
}
