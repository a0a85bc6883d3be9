// SPDX-License-Identifier: MIT OR Apache-2.0

//! Confidence intervals for estimated change-point locations.
//!
//! For change `k` the interval is
//! `[ẑ_k - ⌊q_hi⌋ - 1, ẑ_k - ⌊q_lo⌋ + 1]`, where `q_lo, q_hi` are quantiles of
//! `(ζ_k / a_k)^2 · argmax_r { -|r|/2 + W(r) }` for a two-sided standard
//! Brownian motion `W`.
//!
//! The plug-ins come from the two detected segments around `ẑ_k`:
//! `Λ̂` is the diagonal of pooled residual standard deviations, the support
//! `Ŝ_k` keeps coordinates whose jump exceeds a hard threshold, `γ = Λ̂⁻¹ jump`
//! on `Ŝ_k`, `a_k = |γ|²` and `ζ_k² = γᵀ (Λ̂⁻¹ Σ̂ Λ̂⁻¹) γ`. The quadratic form
//! is evaluated from the residuals directly, so `Σ̂` is never formed.
//!
//! The argmax law is simulated on a grid with random-walk increments. Draws are
//! kept at unit scale and rescaled per change point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::Detection;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::simgen::{derive_seed, normal};
use crate::tensor::TensorSeq;

pub const MIN_PATHS: usize = 10_000;
pub const DEFAULT_PATHS: usize = 200_000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Largest tolerated fraction of paths whose argmax sits on the grid boundary.
pub const MAX_BOUNDARY_FRACTION: f64 = 1e-3;
const LAMBDA_FLOOR: f64 = 1e-6;
const BLOCK: usize = 4096;
const MAX_WIDENINGS: usize = 4;

/// Plug-in jump summary for one detected change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEstimate {
    /// 1-based change index.
    pub k: usize,
    /// Flat coordinates (0-based) in `Ŝ_k`.
    pub support: Vec<usize>,
    /// Estimated jump (right mean minus left mean) on the support.
    pub jump: Vec<f64>,
    /// Residual standard deviations on the support, after flooring.
    pub lambda: Vec<f64>,
    pub a: f64,
    pub zeta: f64,
    /// Some residual deviation was floored at `1e-6`.
    pub degenerate: bool,
    /// `ζ²` was numerically zero and received a ridge.
    pub regularized: bool,
}

impl JumpEstimate {
    /// `(ζ / a)^2`, the scale of the argmax law.
    pub fn scale(&self) -> f64 {
        (self.zeta / self.a).powi(2)
    }
}

/// Builds a [`JumpEstimate`] from raw parts, with an explicit (restricted) `Σ̂`.
///
/// `cov` is row-major `|support| x |support|`. Mostly useful to check the
/// residual-based route against known matrices.
pub fn jump_from_parts(k: usize, support: Vec<usize>, jump: Vec<f64>, lambda: Vec<f64>, cov: &[f64]) -> Result<JumpEstimate> {
    let q = support.len();
    if jump.len() != q || lambda.len() != q || cov.len() != q * q {
        return Err(Error::argument("support, jump, lambda and covariance sizes disagree"));
    }
    if q == 0 {
        return Err(Error::CiUnavailable(format!("change {k}: empty support")));
    }
    let gamma: Vec<f64> = jump.iter().zip(&lambda).map(|(d, l)| d / l).collect();
    let a: f64 = gamma.iter().map(|g| g * g).sum();
    let mut zeta2 = 0.0;
    for i in 0..q {
        for j in 0..q {
            zeta2 += gamma[i] * cov[i * q + j] / (lambda[i] * lambda[j]) * gamma[j];
        }
    }
    let trace: f64 = (0..q).map(|i| cov[i * q + i] / (lambda[i] * lambda[i])).sum();
    let (zeta2, regularized) = regularize(zeta2, a, trace, q);
    Ok(JumpEstimate {
        k,
        support,
        jump,
        lambda,
        a,
        zeta: zeta2.sqrt(),
        degenerate: false,
        regularized,
    })
}

fn regularize(zeta2: f64, a: f64, trace: f64, q: usize) -> (f64, bool) {
    if zeta2 > 1e-12 * a {
        (zeta2, false)
    } else {
        (zeta2.max(0.0) + 1e-8 * (trace / q as f64).max(1.0) * a, true)
    }
}

/// Segment bounds `(start, end]` on each side of change `k` (1-based).
fn segments(detection: &Detection, n: usize, k: usize) -> Result<(usize, usize, usize)> {
    let locs = &detection.locations;
    if k == 0 || k > locs.len() {
        return Err(Error::argument(format!(
            "change index {k} out of range 1..={}",
            locs.len()
        )));
    }
    let prev = if k == 1 { 0 } else { locs[k - 2] };
    let z = locs[k - 1];
    let next = if k == locs.len() { n } else { locs[k] };
    let alpha = detection.alpha;
    if z - prev < alpha || next - z < alpha {
        return Err(Error::CiUnavailable(format!(
            "change {k} at {z}: adjacent segments ({prev}, {z}] and ({z}, {next}] must each hold at least alpha = {alpha} points"
        )));
    }
    Ok((prev, z, next))
}

/// Estimates the jump at detected change `k` (1-based) from the surrounding segments.
pub fn estimate_jump(seq: &TensorSeq, detection: &Detection, k: usize, hard_threshold: f64) -> Result<JumpEstimate> {
    let (prev, z, next) = segments(detection, seq.n(), k)?;
    let p = seq.p();
    let mean_of = |from: usize, to: usize| {
        let mut m = vec![0.0; p];
        for t in from..to {
            for (acc, v) in m.iter_mut().zip(seq.row(t)) {
                *acc += v;
            }
        }
        let len = (to - from) as f64;
        m.iter_mut().for_each(|v| *v /= len);
        m
    };
    // 0-based rows: left segment prev..z, right segment z..next
    let left = mean_of(prev, z);
    let right = mean_of(z, next);
    let dof = (next - prev - 2) as f64;
    let mut var = vec![0.0; p];
    for t in prev..next {
        let mean = if t < z { &left } else { &right };
        for ((acc, v), m) in var.iter_mut().zip(seq.row(t)).zip(mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let support: Vec<usize> = (0..p)
        .filter(|&j| (right[j] - left[j]).abs() > hard_threshold)
        .collect();
    if support.is_empty() {
        return Err(Error::CiUnavailable(format!(
            "change {k} at {z}: no coordinate jumps by more than {hard_threshold:.4}"
        )));
    }
    let mut degenerate = false;
    let lambda: Vec<f64> = support
        .iter()
        .map(|&j| {
            let sd = (var[j] / dof).sqrt();
            if sd < LAMBDA_FLOOR {
                degenerate = true;
                LAMBDA_FLOOR
            } else {
                sd
            }
        })
        .collect();
    let jump: Vec<f64> = support.iter().map(|&j| right[j] - left[j]).collect();
    let weights: Vec<f64> = jump.iter().zip(&lambda).map(|(d, l)| d / (l * l)).collect();
    let a: f64 = jump.iter().zip(&lambda).map(|(d, l)| (d / l).powi(2)).sum();
    let mut zeta2 = 0.0;
    for t in prev..next {
        let mean = if t < z { &left } else { &right };
        let row = seq.row(t);
        let proj: f64 = support
            .iter()
            .zip(&weights)
            .map(|(&j, w)| w * (row[j] - mean[j]))
            .sum();
        zeta2 += proj * proj;
    }
    zeta2 /= dof;
    let trace: f64 = support
        .iter()
        .zip(&lambda)
        .map(|(&j, l)| var[j] / dof / (l * l))
        .sum();
    let (zeta2, regularized) = regularize(zeta2, a, trace, support.len());
    Ok(JumpEstimate {
        k,
        support,
        jump,
        lambda,
        a,
        zeta: zeta2.sqrt(),
        degenerate,
        regularized,
    })
}

/// Grid for the random-walk approximation of `W` on `[-radius, radius]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radius: 60.0,
            step: 0.1,
        }
    }
}

impl GridSpec {
    fn steps(&self) -> Result<usize> {
        if !(self.step > 0.0 && self.radius >= self.step && self.radius.is_finite()) {
            return Err(Error::argument(format!(
                "grid needs 0 < step <= radius, got step {} radius {}",
                self.step, self.radius
            )));
        }
        Ok((self.radius / self.step).round() as usize)
    }
}

/// Sorted unit-scale draws of `argmax_r { -|r|/2 + W(r) }`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgmaxLaw {
    draws: Vec<f64>,
    pub grid: GridSpec,
    pub seed: u64,
    pub boundary_hits: usize,
}

/// Argmax of one side `r ∈ {0, h, ..., m h}`: (index, value). Ties go to the smaller `r`.
fn one_side(rng: &mut ChaCha8Rng, m: usize, h: f64) -> (usize, f64) {
    let sd = h.sqrt();
    let drift = -0.5 * h;
    let (mut w, mut best, mut arg) = (0.0f64, 0.0f64, 0usize);
    for i in 1..=m {
        w += drift + sd * normal(rng);
        if w > best {
            best = w;
            arg = i;
        }
    }
    (arg, best)
}

impl ArgmaxLaw {
    /// Simulates `paths` draws in blocks of 4096, block `b` seeded by `derive_seed(seed, b)`.
    ///
    /// The first `N` draws do not depend on the total, so a run with `2N`
    /// paths extends the one with `N`.
    pub fn simulate(paths: usize, grid: GridSpec, seed: u64, exec: Execution) -> Result<Self> {
        if paths < MIN_PATHS {
            return Err(Error::argument(format!("need at least {MIN_PATHS} paths, got {paths}")));
        }
        let m = grid.steps()?;
        let h = grid.step;
        let blocks = paths.div_ceil(BLOCK);
        let per_block: Vec<(Vec<i64>, usize)> = exec.map(blocks, |b| {
            let count = BLOCK.min(paths - b * BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b as u64));
            let mut out = Vec::with_capacity(count);
            let mut hits = 0;
            for _ in 0..count {
                let (ar, vr) = one_side(&mut rng, m, h);
                let (al, vl) = one_side(&mut rng, m, h);
                let (idx, at_edge) = if vr >= vl {
                    (ar as i64, ar == m)
                } else {
                    (-(al as i64), al == m)
                };
                hits += at_edge as usize;
                out.push(idx);
            }
            (out, hits)
        });
        let boundary_hits = per_block.iter().map(|(_, h)| h).sum();
        if boundary_hits as f64 > MAX_BOUNDARY_FRACTION * paths as f64 {
            return Err(Error::GridTooSmall {
                hits: boundary_hits,
                paths,
                suggested_radius: 2.0 * grid.radius,
            });
        }
        let mut idx: Vec<i64> = per_block.into_iter().flat_map(|(v, _)| v).collect();
        idx.sort_unstable();
        Ok(Self {
            draws: idx.into_iter().map(|i| i as f64 * h).collect(),
            grid,
            seed,
            boundary_hits,
        })
    }

    /// Like [`simulate`](Self::simulate), doubling the radius on boundary trouble.
    pub fn simulate_widening(paths: usize, mut grid: GridSpec, seed: u64, exec: Execution) -> Result<Self> {
        for _ in 0..MAX_WIDENINGS {
            match Self::simulate(paths, grid, seed, exec) {
                Err(Error::GridTooSmall { suggested_radius, .. }) => grid.radius = suggested_radius,
                other => return other,
            }
        }
        Self::simulate(paths, grid, seed, exec)
    }

    pub fn paths(&self) -> usize {
        self.draws.len()
    }

    /// Empirical quantile: the `⌈p N⌉`-th smallest draw.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.draws.len();
        let rank = (p * n as f64).ceil().clamp(1.0, n as f64) as usize;
        self.draws[rank - 1]
    }

    /// `(q_{(1-level)/2}, q_{(1+level)/2})` at unit scale.
    pub fn quantiles(&self, level: f64) -> Result<(f64, f64)> {
        check_level(level)?;
        Ok((self.quantile((1.0 - level) / 2.0), self.quantile((1.0 + level) / 2.0)))
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::argument(format!("confidence level must be in (0, 1), got {level}")))
    }
}

/// Quantiles of `scale · argmax_r { -|r|/2 + W(r) }` at confidence `level`.
pub fn brownian_argmax_quantiles(
    scale: f64,
    level: f64,
    paths: usize,
    grid: GridSpec,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::argument(format!("scale must be positive, got {scale}")));
    }
    check_level(level)?;
    let (lo, hi) = ArgmaxLaw::simulate(paths, grid, seed, exec)?.quantiles(level)?;
    Ok((scale * lo, scale * hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiOptions {
    pub level: f64,
    pub paths: usize,
    pub grid: GridSpec,
    pub seed: u64,
    /// Support threshold on `|jump|`; defaults to `√l_n(s)` from the detection settings.
    pub hard_threshold: Option<f64>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for CiOptions {
    fn default() -> Self {
        Self {
            level: DEFAULT_LEVEL,
            paths: DEFAULT_PATHS,
            grid: GridSpec::default(),
            seed: DEFAULT_SEED,
            hard_threshold: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CIResult {
    pub k: usize,
    pub level: f64,
    pub location: usize,
    pub lower: i64,
    pub upper: i64,
    /// Endpoints divided by `α`.
    pub lower_scaled: f64,
    pub upper_scaled: f64,
    pub scale: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub a: f64,
    pub zeta: f64,
    pub support_size: usize,
    pub degenerate: bool,
    pub regularized: bool,
    pub paths: usize,
    pub grid: GridSpec,
    pub seed: u64,
}

impl CIResult {
    pub fn contains(&self, z: usize) -> bool {
        self.lower <= z as i64 && z as i64 <= self.upper
    }
}

fn threshold_for(detection: &Detection, options: &CiOptions) -> Result<f64> {
    match (options.hard_threshold, &detection.settings) {
        (Some(t), _) => Ok(t),
        (None, Some(s)) => Ok(s.params.threshold().sqrt()),
        (None, None) => Err(Error::argument(
            "detection carries no settings; pass an explicit hard threshold",
        )),
    }
}

/// Interval for change `k` (1-based) given an already simulated argmax law.
pub fn ci_with_law(seq: &TensorSeq, detection: &Detection, k: usize, level: f64, law: &ArgmaxLaw, hard_threshold: f64) -> Result<CIResult> {
    check_level(level)?;
    let est = estimate_jump(seq, detection, k, hard_threshold)?;
    let scale = est.scale();
    if !scale.is_finite() {
        return Err(Error::CiUnavailable(format!("change {k}: non-finite scale")));
    }
    let (lo, hi) = law.quantiles(level)?;
    let (q_lo, q_hi) = (scale * lo, scale * hi);
    let z = detection.locations[k - 1];
    let lower = z as i64 - q_hi.floor() as i64 - 1;
    let upper = z as i64 - q_lo.floor() as i64 + 1;
    let alpha = detection.alpha as f64;
    Ok(CIResult {
        k,
        level,
        location: z,
        lower,
        upper,
        lower_scaled: lower as f64 / alpha,
        upper_scaled: upper as f64 / alpha,
        scale,
        q_lo,
        q_hi,
        a: est.a,
        zeta: est.zeta,
        support_size: est.support.len(),
        degenerate: est.degenerate,
        regularized: est.regularized,
        paths: law.paths(),
        grid: law.grid,
        seed: law.seed,
    })
}

/// Confidence interval for detected change `k` (1-based).
pub fn ci_for_changepoint(seq: &TensorSeq, detection: &Detection, k: usize, options: &CiOptions) -> Result<CIResult> {
    let threshold = threshold_for(detection, options)?;
    segments(detection, seq.n(), k)?;
    let law = ArgmaxLaw::simulate_widening(options.paths, options.grid, options.seed, options.execution)?;
    ci_with_law(seq, detection, k, options.level, &law, threshold)
}

/// Intervals for every detected change; per-change failures are returned in place.
pub fn ci_all(seq: &TensorSeq, detection: &Detection, options: &CiOptions) -> Result<Vec<Result<CIResult>>> {
    let threshold = threshold_for(detection, options)?;
    check_level(options.level)?;
    if detection.locations.is_empty() {
        return Ok(Vec::new());
    }
    let law = ArgmaxLaw::simulate_widening(options.paths, options.grid, options.seed, options.execution)?;
    Ok((1..=detection.k_hat)
        .map(|k| ci_with_law(seq, detection, k, options.level, &law, threshold))
        .collect())
}
