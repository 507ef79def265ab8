// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{file}:{line}:{col}: parse error: {msg}")]
    Parse {
        file: String,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("energy model does not cover opcode(s): {}", .0.join(", "))]
    ModelCoverage(Vec<String>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{0}")]
    Validation(String),

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("ILP infeasible; conflicting constraints: {}", .0.join("; "))]
    Infeasible(Vec<String>),

    #[error("ILP unbounded along: {}", .0.join(", "))]
    Unbounded(Vec<String>),

    #[error("lowering error: {0}")]
    Lowering(String),

    #[error("mapping integrity error: {0}")]
    Mapping(String),

    #[error("simulation error at cycle {cycle} (thread {thread}): {msg}")]
    Simulation { cycle: u64, thread: usize, msg: String },

    #[error("regression error: {0}")]
    Regression(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(file: &str, line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            col,
            msg: msg.into(),
        }
    }

    /// True for errors the CLI reports with the annotation exit code.
    pub fn is_annotation_error(&self) -> bool {
        matches!(self, Error::Annotation(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
