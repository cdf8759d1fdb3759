// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: empty input")]
    EmptyInput { path: String },

    #[error("{path}: line {line}: expected {expected} fields, found {found}")]
    Ragged {
        path: String,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}: line {line}, column {column}: {reason}")]
    BadCell {
        path: String,
        line: u64,
        column: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] var_cpd::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::EmptyInput { .. } => "empty_input",
            CliError::Ragged { .. } => "ragged_row",
            CliError::BadCell { .. } => "bad_cell",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        }
    }

    /// Single-line JSON form written to stderr.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Line {
            error: self.kind(),
            message: self.to_string().replace('\n', " "),
        })
        .expect("plain strings serialize")
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
