// SPDX-License-Identifier: MIT OR Apache-2.0

//! Element-wise moving-sum differences of a tensor sequence.
//!
//! Row `i` (1-based, `1 <= i <= n - 2α + 1`) of a [`MosumField`] holds
//!
//! ```text
//! D_n(i) = (1/α) * ( Σ_{t=i}^{i+α-1} X_t  -  Σ_{t=i+α}^{i+2α-1} X_t )
//! ```
//!
//! flattened row-major. Rows are produced by a sliding update over fixed
//! chunks of rows; each chunk re-seeds its two window sums, so chunk size
//! (and therefore rounding) depends only on `(n, α)`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tensor::TensorSeq;

/// Summation used for the running window sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Summation {
    Plain,
    /// Neumaier-compensated running sums.
    Compensated,
    /// Compensated once `n * α` exceeds [`COMPENSATION_THRESHOLD`].
    #[default]
    Auto,
}

pub const COMPENSATION_THRESHOLD: usize = 10_000_000;

#[derive(Clone, Copy, Debug, Default)]
pub struct MosumOptions {
    pub execution: Execution,
    pub summation: Summation,
}

/// `D_n(i)` for every valid `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MosumField {
    alpha: usize,
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl MosumField {
    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Elements per row.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of rows, `n - 2α + 1`.
    pub fn rows(&self) -> usize {
        self.values.len() / self.p
    }

    /// Valid 1-based range of `i`.
    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.rows()
    }

    /// Flattened `D_n(i)` for 1-based `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(
            i >= 1 && i <= self.rows(),
            "MOSUM index {i} outside 1..={}",
            self.rows()
        );
        &self.values[(i - 1) * self.p..i * self.p]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Smallest `n` accepted for window `alpha`.
pub fn min_length(alpha: usize) -> usize {
    3 * alpha
}

fn check_length(n: usize, alpha: usize) -> Result<()> {
    if alpha == 0 {
        return Err(Error::argument("window alpha must be at least 1"));
    }
    if n < min_length(alpha) {
        return Err(Error::SequenceTooShort {
            n,
            alpha,
            min_n: min_length(alpha),
        });
    }
    Ok(())
}

fn chunk_rows(alpha: usize) -> usize {
    (8 * alpha).max(256)
}

/// Sliding-window MOSUM with default options.
pub fn mosum_field(seq: &TensorSeq, alpha: usize) -> Result<MosumField> {
    mosum_field_with(seq, alpha, MosumOptions::default())
}

pub fn mosum_field_with(seq: &TensorSeq, alpha: usize, opts: MosumOptions) -> Result<MosumField> {
    check_length(seq.n(), alpha)?;
    Ok(sliding(seq.as_slice(), seq.n(), seq.p(), alpha, opts))
}

#[derive(Clone, Copy, Default)]
struct Acc {
    sum: f64,
    comp: f64,
}

impl Acc {
    #[inline]
    fn add(&mut self, x: f64, compensated: bool) {
        if compensated {
            let t = self.sum + x;
            if self.sum.abs() >= x.abs() {
                self.comp += (self.sum - t) + x;
            } else {
                self.comp += (x - t) + self.sum;
            }
            self.sum = t;
        } else {
            self.sum += x;
        }
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn sliding(data: &[f64], n: usize, p: usize, alpha: usize, opts: MosumOptions) -> MosumField {
    let rows = n - 2 * alpha + 1;
    let compensated = match opts.summation {
        Summation::Plain => false,
        Summation::Compensated => true,
        Summation::Auto => n.saturating_mul(alpha) > COMPENSATION_THRESHOLD,
    };
    let chunk = chunk_rows(alpha);
    let inv = 1.0 / alpha as f64;
    let row = |t: usize| &data[t * p..(t + 1) * p];

    let mut values = vec![0.0; rows * p];
    opts.execution
        .for_each_chunk_mut(&mut values, chunk * p, |c, out| {
            let first = c * chunk;
            let count = out.len() / p;
            let mut lead = vec![Acc::default(); p];
            let mut lag = vec![Acc::default(); p];
            for t in first..first + alpha {
                for (a, &x) in lead.iter_mut().zip(row(t)) {
                    a.add(x, compensated);
                }
                for (b, &x) in lag.iter_mut().zip(row(t + alpha)) {
                    b.add(x, compensated);
                }
            }
            for k in 0..count {
                let i = first + k;
                let dst = &mut out[k * p..(k + 1) * p];
                for ((d, a), b) in dst.iter_mut().zip(&lead).zip(&lag) {
                    *d = (a.value() - b.value()) * inv;
                }
                if k + 1 == count {
                    break;
                }
                let (old, mid, new) = (row(i), row(i + alpha), row(i + 2 * alpha));
                for j in 0..p {
                    lead[j].add(mid[j], compensated);
                    lead[j].add(-old[j], compensated);
                    lag[j].add(new[j], compensated);
                    lag[j].add(-mid[j], compensated);
                }
            }
        });
    MosumField {
        alpha,
        n,
        p,
        values,
    }
}

/// Direct two-loop evaluation of `D_n(i)` at one 1-based `i`.
pub fn mosum_naive(seq: &TensorSeq, alpha: usize, i: usize) -> Result<Vec<f64>> {
    check_length(seq.n(), alpha)?;
    let rows = seq.n() - 2 * alpha + 1;
    if i == 0 || i > rows {
        return Err(Error::Index(format!("MOSUM index {i} outside 1..={rows}")));
    }
    let p = seq.p();
    let mut first = vec![0.0; p];
    let mut second = vec![0.0; p];
    for t in i..i + alpha {
        for (acc, &x) in first.iter_mut().zip(seq.tensor(t)) {
            *acc += x;
        }
    }
    for t in i + alpha..i + 2 * alpha {
        for (acc, &x) in second.iter_mut().zip(seq.tensor(t)) {
            *acc += x;
        }
    }
    Ok(first
        .iter()
        .zip(&second)
        .map(|(a, b)| (a - b) / alpha as f64)
        .collect())
}

/// Checks `0 < z_1 < ... < z_K < n` and one mean per segment of equal length.
pub(crate) fn validate_segments(means: &[Vec<f64>], changepoints: &[usize], n: usize) -> Result<usize> {
    if means.len() != changepoints.len() + 1 {
        return Err(Error::argument(format!(
            "{} change points need {} segment means, got {}",
            changepoints.len(),
            changepoints.len() + 1,
            means.len()
        )));
    }
    let p = means[0].len();
    if p == 0 || means.iter().any(|m| m.len() != p) {
        return Err(Error::argument("segment means must share one non-zero length"));
    }
    let mut prev = 0usize;
    for &z in changepoints {
        if z <= prev || z >= n {
            return Err(Error::argument(format!(
                "change points must be strictly increasing inside 1..{n}; got {changepoints:?}"
            )));
        }
        prev = z;
    }
    Ok(p)
}

/// Exact `D(i)` of a piecewise-constant mean sequence.
///
/// Segment `k` (0-based) covers times `z_k + 1 ..= z_{k+1}` with `z_0 = 0`
/// and `z_{K+1} = n`.
pub fn population_mosum(
    means: &[Vec<f64>],
    changepoints: &[usize],
    n: usize,
    alpha: usize,
) -> Result<MosumField> {
    let p = validate_segments(means, changepoints, n)?;
    check_length(n, alpha)?;
    let mut bounds = Vec::with_capacity(changepoints.len() + 2);
    bounds.push(0usize);
    bounds.extend_from_slice(changepoints);
    bounds.push(n);
    // overlap of the closed 1-based window [lo, hi] with segment k
    let overlap = |k: usize, lo: usize, hi: usize| -> i64 {
        let (s, e) = (bounds[k] + 1, bounds[k + 1]);
        let (a, b) = (lo.max(s), hi.min(e));
        if a > b {
            0
        } else {
            (b - a + 1) as i64
        }
    };
    let rows = n - 2 * alpha + 1;
    let mut values = vec![0.0; rows * p];
    for i in 1..=rows {
        let dst = &mut values[(i - 1) * p..i * p];
        for (k, mean) in means.iter().enumerate() {
            let w = overlap(k, i, i + alpha - 1) - overlap(k, i + alpha, i + 2 * alpha - 1);
            if w != 0 {
                let w = w as f64 / alpha as f64;
                for (d, &m) in dst.iter_mut().zip(mean) {
                    *d += w * m;
                }
            }
        }
    }
    Ok(MosumField {
        alpha,
        n,
        p,
        values,
    })
}
