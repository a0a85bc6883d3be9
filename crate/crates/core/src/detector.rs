// SPDX-License-Identifier: MIT OR Apache-2.0

//! From a ratio series to change-point estimates.
//!
//! 1. Every up-crossing of `τ` (`T(M) < τ <= T(M + 1)`) anchors a candidate
//!    interval `(m, M)` with `m = M - ⌊2√τ/(√τ + 1) α⌋`.
//! 2. Spurious anchors are pruned: an anchor followed within `3α/2` by the
//!    next one is removed (full-element statistic: only if additionally
//!    `T(⌊M - α/2⌋) >= 1`).
//! 3. Each surviving interval contributes `ẑ = r + 2α - 1`, where `r` is the
//!    largest minimizer of `T` over the open range `(m, M)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mosum::{min_length, mosum_field_with, MosumOptions, Summation};
use crate::ridge::{ratio_series_msfd_field, ratio_series_sfd_with, RatioSeries};
use crate::screening::{derive_params, DetectionMode, ParamOverrides, ScreeningParams};
use crate::tensor::TensorSeq;

pub const SFD_TAU: f64 = 0.8;
pub const MSFD_TAU: f64 = 0.4;

/// Tuning for one detection run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub mode: DetectionMode,
    /// Structural mode for the slice-wise statistic (1-based); defaults to the last mode.
    pub structural_mode: Option<usize>,
    pub overrides: ParamOverrides,
    /// Crossing threshold; defaults to 0.8 (SFD) or 0.4 (MSFD).
    pub tau: Option<f64>,
    #[serde(skip)]
    pub execution: Execution,
    #[serde(skip)]
    pub summation: Summation,
}

impl DetectorConfig {
    pub fn sfd() -> Self {
        Self::default()
    }

    pub fn msfd(structural_mode: Option<usize>) -> Self {
        Self {
            mode: DetectionMode::Msfd,
            structural_mode,
            ..Self::default()
        }
    }

    pub fn resolved_tau(&self) -> f64 {
        self.tau.unwrap_or(match self.mode {
            DetectionMode::Sfd => SFD_TAU,
            DetectionMode::Msfd => MSFD_TAU,
        })
    }
}

/// Why an interval did not produce a location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalStatus {
    Kept,
    /// Next anchor within `3α/2` and `T(⌊M - α/2⌋) >= 1`.
    PrunedSpacingProbe,
    /// Next anchor within `3α/2`.
    PrunedSpacing,
    /// `(m, M)` contains no valid index.
    EmptyRange,
    /// Minimizer coincides with or precedes the previous location.
    DuplicateLocation,
}

impl IntervalStatus {
    pub fn is_kept(self) -> bool {
        self == Self::Kept
    }
}

/// A threshold crossing and the search interval it anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateInterval {
    /// Right anchor `M` (1-based).
    pub anchor: usize,
    /// Left end `m`; may be below 1 near the start of the series.
    pub start: i64,
    /// Emitted at the last valid index without an observed up-crossing.
    pub edge: bool,
    pub status: IntervalStatus,
    /// Largest minimizer `r` inside `(m, M)` once located.
    pub minimizer: Option<usize>,
}

/// Echo of the resolved settings behind a [`Detection`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionSettings {
    pub mode: DetectionMode,
    pub structural_mode: Option<usize>,
    pub tau: f64,
    pub params: ScreeningParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub k_hat: usize,
    /// Estimated change points `ẑ_1 < ... < ẑ_K̂` (1-based time indices).
    pub locations: Vec<usize>,
    /// All candidate intervals, kept and discarded, in anchor order.
    pub intervals: Vec<CandidateInterval>,
    pub alpha: usize,
    /// Number of adjacent candidate pairs whose intervals overlap.
    pub overlapping_intervals: usize,
    pub settings: Option<DetectionSettings>,
}

impl Detection {
    pub fn has_edge_interval(&self) -> bool {
        self.intervals.iter().any(|c| c.edge)
    }
}

/// Interval half-width `⌊2√τ/(√τ + 1) α⌋`.
pub fn interval_length(tau: f64, alpha: usize) -> usize {
    let r = tau.sqrt();
    ((2.0 * r / (r + 1.0)) * alpha as f64).floor() as usize
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::config(format!("tau must lie in (0, 1), got {tau}")));
    }
    Ok(())
}

/// All up-crossings of `tau`, in ascending order.
pub fn find_intervals(series: &RatioSeries, tau: f64) -> Result<Vec<CandidateInterval>> {
    check_tau(tau)?;
    let width = interval_length(tau, series.alpha).max(1) as i64;
    let t = &series.t;
    let mut out = Vec::new();
    let mut push = |anchor: usize, edge: bool| {
        out.push(CandidateInterval {
            anchor,
            start: anchor as i64 - width,
            edge,
            status: IntervalStatus::Kept,
            minimizer: None,
        })
    };
    for k in 0..t.len().saturating_sub(1) {
        if t[k] < tau && t[k + 1] >= tau {
            push(k + 1, false);
        }
    }
    if t.last().is_some_and(|&v| v < tau) {
        push(t.len(), true);
    }
    Ok(out)
}

fn spacing_violated(intervals: &[CandidateInterval], k: usize, alpha: usize) -> bool {
    intervals
        .get(k + 1)
        .is_some_and(|next| 2 * (next.anchor - intervals[k].anchor) <= 3 * alpha)
}

/// Pruning for the full-element statistic: spacing and probe conditions.
///
/// Gaps are measured on the list as given, so pruned entries still count as
/// neighbours; the pass is idempotent.
pub fn prune_sfd(intervals: &[CandidateInterval], series: &RatioSeries, alpha: usize) -> Vec<CandidateInterval> {
    let mut out = intervals.to_vec();
    for (k, c) in out.iter_mut().enumerate() {
        if !c.status.is_kept() || !spacing_violated(intervals, k, alpha) {
            continue;
        }
        // ⌊M - α/2⌋
        let probe = c.anchor as i64 - alpha.div_ceil(2) as i64;
        if probe >= 1 && (probe as usize) <= series.len() && series.at(probe as usize) >= 1.0 {
            c.status = IntervalStatus::PrunedSpacingProbe;
        }
    }
    out
}

/// Pruning for the slice-wise statistic: spacing condition only.
pub fn prune_msfd(intervals: &[CandidateInterval], alpha: usize) -> Vec<CandidateInterval> {
    let mut out = intervals.to_vec();
    for (k, c) in out.iter_mut().enumerate() {
        if c.status.is_kept() && spacing_violated(intervals, k, alpha) {
            c.status = IntervalStatus::PrunedSpacing;
        }
    }
    out
}

/// Largest minimizer of the series over the open interval of each kept candidate.
pub fn locate(intervals: &[CandidateInterval], series: &RatioSeries, alpha: usize) -> Detection {
    let mut out = intervals.to_vec();
    let mut locations = Vec::new();
    for cand in out.iter_mut().filter(|c| c.status.is_kept()) {
        let lo = (cand.start + 1).max(1) as usize;
        let hi = cand.anchor.min(series.len() + 1) - 1;
        if lo > hi {
            cand.status = IntervalStatus::EmptyRange;
            continue;
        }
        let mut r = lo;
        for i in lo..=hi {
            if series.at(i) <= series.at(r) {
                r = i;
            }
        }
        cand.minimizer = Some(r);
        let z = r + 2 * alpha - 1;
        if locations.last().is_some_and(|&prev| z <= prev) {
            cand.status = IntervalStatus::DuplicateLocation;
            continue;
        }
        locations.push(z);
    }
    let overlapping_intervals = out
        .windows(2)
        .filter(|w| w[1].start < w[0].anchor as i64)
        .count();
    Detection {
        k_hat: locations.len(),
        locations,
        intervals: out,
        alpha,
        overlapping_intervals,
        settings: None,
    }
}

/// Series and detection from one run, for reporting and plotting.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub params: ScreeningParams,
    pub tau: f64,
    pub series: RatioSeries,
    pub detection: Detection,
}

/// Resolved parameters for a sequence of length `n` under `config`.
pub fn resolve_params(n: usize, config: &DetectorConfig) -> Result<ScreeningParams> {
    let params = derive_params(n, config.mode, &config.overrides)?;
    if n < min_length(params.alpha) {
        return Err(Error::SequenceTooShort {
            n,
            alpha: params.alpha,
            min_n: min_length(params.alpha),
        });
    }
    Ok(params)
}

/// Runs the full pipeline and keeps the intermediate ratio series.
pub fn analyze(seq: &TensorSeq, config: &DetectorConfig) -> Result<Analysis> {
    let params = resolve_params(seq.n(), config)?;
    let tau = config.resolved_tau();
    check_tau(tau)?;
    let field = mosum_field_with(
        seq,
        params.alpha,
        MosumOptions {
            execution: config.execution,
            summation: config.summation,
        },
    )?;
    let alpha = params.alpha;
    let (series, structural_mode) = match config.mode {
        DetectionMode::Sfd => (ratio_series_sfd_with(&field, &params, config.execution)?, None),
        DetectionMode::Msfd => {
            let mode = config.structural_mode.unwrap_or(seq.shape().order());
            let s = ratio_series_msfd_field(&field, seq.shape(), mode, &params, config.execution)?;
            (s, Some(mode))
        }
    };
    let candidates = find_intervals(&series, tau)?;
    let pruned = match config.mode {
        DetectionMode::Sfd => prune_sfd(&candidates, &series, alpha),
        DetectionMode::Msfd => prune_msfd(&candidates, alpha),
    };
    let mut detection = locate(&pruned, &series, alpha);
    detection.settings = Some(DetectionSettings {
        mode: config.mode,
        structural_mode,
        tau,
        params,
    });
    Ok(Analysis {
        params,
        tau,
        series,
        detection,
    })
}

/// Estimates the number and locations of change points.
pub fn detect(seq: &TensorSeq, config: &DetectorConfig) -> Result<Detection> {
    analyze(seq, config).map(|a| a.detection)
}
