// SPDX-License-Identifier: MIT OR Apache-2.0

//! Adaptive ridge and the ratio statistics built from screened MOSUM norms.
//!
//! For `1 <= i <= n - 3α + 1`:
//!
//! ```text
//! T_n(i) = (‖D_n(i)‖²_s + c_n(i)) / (‖D_n(i + α)‖²_s + c_n(i))
//! c_n(i) = s1 ε_n g(n) / (1{i ∈ S} + 1/n)
//! ```
//!
//! where `S` holds the indices whose MOSUM has at least one squared entry
//! above `l_n(s)`. The ridge is evaluated at the numerator's index only and
//! shared by numerator and denominator. The slice-wise variant computes one
//! series per slice of the structural mode and keeps the pointwise minimum.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mosum::{mosum_field_with, MosumField, MosumOptions};
use crate::screening::{norm_from_parts, screen, ScreeningParams};
use crate::tensor::{Shape, TensorSeq};

/// `c_n(i)` for a given screening-set membership.
pub fn ridge_value(in_s: bool, params: &ScreeningParams) -> f64 {
    let indicator = if in_s { 1.0 } else { 0.0 };
    params.ridge_numerator() / (indicator + 1.0 / params.n as f64)
}

/// Per-slice series behind a min-combined statistic; matrices are slice-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceRatios {
    pub count: usize,
    pub t: Vec<f64>,
    pub ridge: Vec<f64>,
    pub in_s: Vec<bool>,
    /// 1-based slice attaining the minimum at each index (lowest on ties).
    pub argmin: Vec<usize>,
}

impl SliceRatios {
    /// Series of slice `l` (1-based).
    pub fn slice_t(&self, l: usize) -> &[f64] {
        let len = self.t.len() / self.count;
        &self.t[(l - 1) * len..l * len]
    }
}

/// A ratio statistic over its valid index range `1..=len`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioSeries {
    pub alpha: usize,
    pub n: usize,
    /// `t[i - 1] = T(i)`.
    pub t: Vec<f64>,
    /// Ridge used at each index (for the min-combined statistic, the minimizing slice's).
    pub ridge: Vec<f64>,
    /// Screening-set membership at each index (minimizing slice for the min-combined statistic).
    pub in_s: Vec<bool>,
    /// Screened norm of `D_n(i)` for every MOSUM row; for the slice-wise
    /// statistic, the largest slice norm.
    pub signal: Vec<f64>,
    pub slices: Option<SliceRatios>,
}

impl RatioSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `T(i)` for 1-based `i`.
    pub fn at(&self, i: usize) -> f64 {
        self.t[i - 1]
    }
}

fn check_field(field: &MosumField, params: &ScreeningParams) -> Result<usize> {
    if field.alpha() != params.alpha {
        return Err(Error::argument(format!(
            "MOSUM window {} differs from configured alpha {}",
            field.alpha(),
            params.alpha
        )));
    }
    if field.rows() <= field.alpha() {
        return Err(Error::SequenceTooShort {
            n: field.n(),
            alpha: field.alpha(),
            min_n: 3 * field.alpha(),
        });
    }
    Ok(field.rows() - field.alpha())
}

/// Full-element statistic `T_n`.
pub fn ratio_series_sfd(field: &MosumField, params: &ScreeningParams) -> Result<RatioSeries> {
    ratio_series_sfd_with(field, params, Execution::default())
}

pub fn ratio_series_sfd_with(
    field: &MosumField,
    params: &ScreeningParams,
    exec: Execution,
) -> Result<RatioSeries> {
    ratio_series_sfd_at(field, params, params.threshold(), exec)
}

/// Population-level statistic: screening threshold 0, so membership is `S*`.
///
/// Applied to the exact MOSUM of a piecewise-constant mean, this is the
/// noiseless reference curve the sample statistic estimates.
pub fn population_ratio_series(field: &MosumField, params: &ScreeningParams) -> Result<RatioSeries> {
    ratio_series_sfd_at(field, params, 0.0, Execution::Sequential)
}

fn ratio_series_sfd_at(
    field: &MosumField,
    params: &ScreeningParams,
    threshold: f64,
    exec: Execution,
) -> Result<RatioSeries> {
    params.validate()?;
    let len = check_field(field, params)?;
    let n = params.n;
    let screened = exec.map(field.rows(), |r| screen(field.row(r + 1), threshold));
    let signal: Vec<f64> = screened.iter().map(|&(s, c)| norm_from_parts(s, c, n)).collect();
    let in_s: Vec<bool> = screened[..len].iter().map(|&(_, c)| c > 0).collect();
    let ridge: Vec<f64> = in_s.iter().map(|&m| ridge_value(m, params)).collect();
    let alpha = params.alpha;
    let t = (0..len)
        .map(|i| (signal[i] + ridge[i]) / (signal[i + alpha] + ridge[i]))
        .collect();
    Ok(RatioSeries {
        alpha,
        n,
        t,
        ridge,
        in_s,
        signal,
        slices: None,
    })
}

/// Slice-wise statistic `T_n^v` along `structural_mode` (1-based).
pub fn ratio_series_msfd(seq: &TensorSeq, structural_mode: usize, params: &ScreeningParams) -> Result<RatioSeries> {
    let exec = Execution::default();
    let field = mosum_field_with(
        seq,
        params.alpha,
        MosumOptions {
            execution: exec,
            ..Default::default()
        },
    )?;
    ratio_series_msfd_field(&field, seq.shape(), structural_mode, params, exec)
}

/// Slice-wise statistic from an already computed MOSUM field of a `shape`-shaped sequence.
pub fn ratio_series_msfd_field(
    field: &MosumField,
    shape: &Shape,
    structural_mode: usize,
    params: &ScreeningParams,
    exec: Execution,
) -> Result<RatioSeries> {
    params.validate()?;
    let len = check_field(field, params)?;
    if field.p() != shape.len() {
        return Err(Error::argument("MOSUM field does not match the tensor shape"));
    }
    let count = shape.dim(structural_mode)?;
    let inner = shape.stride(structural_mode)?;
    let n = params.n;
    let alpha = params.alpha;
    let threshold = params.threshold();

    // per row: (sum, count) for each slice
    let per_row: Vec<Vec<(f64, usize)>> = exec.map(field.rows(), |r| {
        let mut acc = vec![(0.0f64, 0usize); count];
        for (j, &v) in field.row(r + 1).iter().enumerate() {
            let sq = v * v;
            if sq > threshold {
                let slot = &mut acc[(j / inner) % count];
                slot.0 += sq;
                slot.1 += 1;
            }
        }
        acc
    });

    let mut t = vec![0.0; count * len];
    let mut ridge = vec![0.0; count * len];
    let mut in_s = vec![false; count * len];
    for l in 0..count {
        let norm = |r: usize| {
            let (s, c) = per_row[r][l];
            norm_from_parts(s, c, n)
        };
        for i in 0..len {
            let member = per_row[i][l].1 > 0;
            let c = ridge_value(member, params);
            t[l * len + i] = (norm(i) + c) / (norm(i + alpha) + c);
            ridge[l * len + i] = c;
            in_s[l * len + i] = member;
        }
    }

    let mut min_t = vec![0.0; len];
    let mut argmin = vec![0usize; len];
    for i in 0..len {
        let mut best = 0;
        for l in 1..count {
            if t[l * len + i] < t[best * len + i] {
                best = l;
            }
        }
        min_t[i] = t[best * len + i];
        argmin[i] = best + 1;
    }
    let top_ridge = (0..len).map(|i| ridge[(argmin[i] - 1) * len + i]).collect();
    let top_in_s = (0..len).map(|i| in_s[(argmin[i] - 1) * len + i]).collect();
    let signal = per_row
        .iter()
        .map(|acc| {
            acc.iter()
                .map(|&(s, c)| norm_from_parts(s, c, n))
                .fold(0.0, f64::max)
        })
        .collect();

    Ok(RatioSeries {
        alpha,
        n,
        t: min_t,
        ridge: top_ridge,
        in_s: top_in_s,
        signal,
        slices: Some(SliceRatios {
            count,
            t,
            ridge,
            in_s,
            argmin,
        }),
    })
}
