// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple change-point detection for sequences of tensors.
//!
//! The pipeline computes moving-sum (MOSUM) differences of the sequence,
//! screens out small entries, forms a ratio statistic with an adaptive ridge,
//! and reads change points off the dips of that ratio. See [`detect`].

pub mod confidence;
pub mod detector;
pub mod error;
pub mod exec;
pub mod harness;
pub mod io;
pub mod mosum;
pub mod plot;
pub mod ridge;
pub mod screening;
pub mod simgen;
pub mod tensor;

pub use confidence::{ci_for_changepoint, CIResult, CiOptions, GridSpec, JumpEstimate};
pub use detector::{analyze, detect, Analysis, CandidateInterval, Detection, DetectorConfig, IntervalStatus};
pub use error::{Error, Result};
pub use exec::Execution;
pub use harness::{run_experiment, RunReport};
pub use mosum::{mosum_field, MosumField};
pub use ridge::RatioSeries;
pub use screening::{derive_params, DetectionMode, ParamOverrides, ScreeningParams};
pub use simgen::{SimDesign, SimSpec};
pub use tensor::{Shape, TensorSeq};
