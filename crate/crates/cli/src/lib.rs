//! Scenario ingestion, design persistence and result emission for the
//! `pimaw` command-line tool.

pub mod commands;
pub mod design_file;
pub mod error;
pub mod output;
pub mod scenario;

pub use commands::{cmd_compare, cmd_simulate, cmd_synth, cmd_verify, Options};
pub use error::{CliError, CliResult};
