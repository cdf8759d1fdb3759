// SPDX-License-Identifier: MIT OR Apache-2.0

//! Library side of the `var-cpd` binary: ingestion, configuration and the
//! subcommands. JSON reports carry [`SCHEMA_VERSION`] and 1-based time indices.

pub mod commands;
pub mod config;
pub mod error;
pub mod input;

pub use config::{resolve_config, Overrides, Resolved};
pub use error::{CliError, Result};
pub use input::{load_csv, parse_csv, write_csv};

pub const SCHEMA_VERSION: u32 = 1;
