// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors produced by the detection pipeline, generators and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index error: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("sequence too short: n = {n}, but window alpha = {alpha} needs n >= {min_n}")]
    SequenceTooShort { n: usize, alpha: usize, min_n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(
        "argmax hit the grid boundary in {hits} of {paths} paths; widen the grid to R >= {suggested_radius}"
    )]
    GridTooSmall { hits: usize, paths: usize, suggested_radius: f64 },

    #[error("confidence interval unavailable: {0}")]
    CiUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Self::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Self::Format(msg.into())
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Self::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
