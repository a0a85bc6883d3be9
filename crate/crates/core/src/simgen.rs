// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded generators for piecewise-constant tensor mean sequences with Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mosum::validate_segments;
use crate::screening::default_alpha;
use crate::tensor::{Shape, TensorSeq};

/// Sample size of the reference designs.
pub const DESIGN_N: usize = 1800;
/// Change points of the reference designs.
pub const DESIGN_CHANGEPOINTS: [usize; 8] = [200, 400, 600, 800, 1000, 1200, 1400, 1600];
/// Correlation decay of the row-covariance preset.
pub const ROW_CORRELATION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Independent `N(0, σ²)` entries.
    Iid { sigma: f64 },
    /// Independent fibers along the last mode, each `N(0, cov)`; `cov` is row-major `q x q`.
    RowCorrelated { cov: Vec<f64> },
    /// Independent entries with their own standard deviations.
    PerElement { sigma: Vec<f64> },
}

/// Ground truth for one synthetic sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub shape: Shape,
    /// `z_1 < ... < z_K`; segment `k` covers `z_{k-1} + 1 ..= z_k` with `z_0 = 0`, `z_{K+1} = n`.
    pub changepoints: Vec<usize>,
    /// One flattened mean tensor per segment.
    pub means: Vec<Vec<f64>>,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl SimSpec {
    pub fn k(&self) -> usize {
        self.changepoints.len()
    }

    /// Minimum segment length.
    pub fn min_spacing(&self) -> usize {
        let mut prev = 0;
        let mut best = usize::MAX;
        for &z in self.changepoints.iter().chain(std::iter::once(&self.n)) {
            best = best.min(z - prev);
            prev = z;
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        let p = validate_segments(&self.means, &self.changepoints, self.n)?;
        if p != self.shape.len() {
            return Err(Error::argument(format!(
                "segment means have {p} entries but the shape holds {}",
                self.shape.len()
            )));
        }
        if self.means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::argument("segment means must be finite"));
        }
        match &self.noise {
            NoiseModel::Iid { sigma } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::argument("noise sigma must be finite and >= 0"));
                }
            }
            NoiseModel::PerElement { sigma } => {
                if sigma.len() != p || sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return Err(Error::argument(format!(
                        "per-element sigma needs {p} finite non-negative values"
                    )));
                }
            }
            NoiseModel::RowCorrelated { cov } => {
                let q = *self.shape.dims().last().expect("order >= 1");
                if cov.len() != q * q {
                    return Err(Error::argument(format!("row covariance must be {q}x{q}")));
                }
                cholesky(cov, q)?;
            }
        }
        Ok(())
    }

    /// Non-fatal issues: too-close change points, zero jumps.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let alpha = default_alpha(self.n);
        if !self.changepoints.is_empty() && self.min_spacing() < 2 * alpha {
            out.push(format!(
                "minimum spacing {} is below 2 * alpha = {}",
                self.min_spacing(),
                2 * alpha
            ));
        }
        for (k, w) in self.means.windows(2).enumerate() {
            if w[0] == w[1] {
                out.push(format!(
                    "segments {} and {} share one mean; change point {} has no jump",
                    k + 1,
                    k + 2,
                    self.changepoints[k]
                ));
            }
        }
        out
    }

    /// Mean tensor at 1-based time `t`.
    pub fn mean_at(&self, t: usize) -> &[f64] {
        let k = self.changepoints.partition_point(|&z| z < t);
        &self.means[k]
    }
}

/// Lower Cholesky factor (row-major) of a symmetric positive-definite `q x q` matrix.
pub(crate) fn cholesky(a: &[f64], q: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..=i {
            let mut sum = a[i * q + j];
            for k in 0..j {
                sum -= l[i * q + k] * l[j * q + k];
            }
            if i == j {
                if sum.is_nan() || sum <= 0.0 {
                    return Err(Error::argument("covariance is not positive definite"));
                }
                l[i * q + i] = sum.sqrt();
            } else {
                l[i * q + j] = sum / l[j * q + j];
            }
        }
    }
    Ok(l)
}

/// `Σ_ij = ρ^|i - j|`.
pub fn ar1_covariance(q: usize, rho: f64) -> Vec<f64> {
    let mut cov = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            cov[i * q + j] = rho.powi((i as i32 - j as i32).abs());
        }
    }
    cov
}

pub fn identity_covariance(q: usize) -> Vec<f64> {
    let mut cov = vec![0.0; q * q];
    for i in 0..q {
        cov[i * q + i] = 1.0;
    }
    cov
}

#[inline]
pub(crate) fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws the sequence described by `spec`; deterministic in `spec.seed`.
pub fn gen_custom(spec: &SimSpec) -> Result<TensorSeq> {
    spec.validate()?;
    let p = spec.shape.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(spec.n * p);
    let chol = match &spec.noise {
        NoiseModel::RowCorrelated { cov } => {
            let q = *spec.shape.dims().last().expect("order >= 1");
            Some((cholesky(cov, q)?, q))
        }
        _ => None,
    };
    let mut z = vec![0.0f64; p];
    for t in 1..=spec.n {
        let mean = spec.mean_at(t);
        match &spec.noise {
            NoiseModel::Iid { sigma } if *sigma == 0.0 => data.extend_from_slice(mean),
            NoiseModel::Iid { sigma } => {
                data.extend(mean.iter().map(|&m| m + sigma * normal(&mut rng)));
            }
            NoiseModel::PerElement { sigma } => {
                data.extend(
                    mean.iter()
                        .zip(sigma)
                        .map(|(&m, &s)| m + s * normal(&mut rng)),
                );
            }
            NoiseModel::RowCorrelated { .. } => {
                let (l, q) = chol.as_ref().expect("factor computed above");
                for v in z.iter_mut() {
                    *v = normal(&mut rng);
                }
                for (fiber, mean_fiber) in z.chunks(*q).zip(mean.chunks(*q)) {
                    for j in 0..*q {
                        let mut e = 0.0;
                        for k in 0..=j {
                            e += l[j * q + k] * fiber[k];
                        }
                        data.push(mean_fiber[j] + e);
                    }
                }
            }
        }
    }
    TensorSeq::new(spec.shape.clone(), data)
}

fn alternating(high: Vec<f64>, low: Vec<f64>, k: usize) -> Vec<Vec<f64>> {
    (0..=k)
        .map(|s| if s % 2 == 0 { high.clone() } else { low.clone() })
        .collect()
}

/// Order-1 dense design: nine segments alternating between all-`1 + signal` and all-`1`, `N(0, I)` noise.
pub fn gen_dense_order1(p: usize, signal: f64, seed: u64) -> Result<(TensorSeq, SimSpec)> {
    gen_sparse_order1(p, signal, 1.0, seed)
}

/// Order-1 design where only the first `⌈fraction * p⌉` coordinates change by `signal`.
pub fn gen_sparse_order1(p: usize, signal: f64, fraction: f64, seed: u64) -> Result<(TensorSeq, SimSpec)> {
    if p < 1 {
        return Err(Error::argument("dimension p must be at least 1"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::argument(format!("sparsity fraction must be in (0, 1], got {fraction}")));
    }
    let changed = ((fraction * p as f64).ceil() as usize).min(p);
    let high: Vec<f64> = (0..p).map(|j| if j < changed { 1.0 + signal } else { 1.0 }).collect();
    let spec = SimSpec {
        n: DESIGN_N,
        shape: Shape::vector(p)?,
        changepoints: DESIGN_CHANGEPOINTS.to_vec(),
        means: alternating(high, vec![1.0; p], DESIGN_CHANGEPOINTS.len()),
        noise: NoiseModel::Iid { sigma: 1.0 },
        seed,
    };
    Ok((gen_custom(&spec)?, spec))
}

/// Mean layout of the order-2 designs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixDesign {
    /// `p2 = p1`; means all 1.4 vs all 1.
    Symmetric,
    /// `p2 = 16 p1`; first mean `0.8^|i-j|` on and below the diagonal and 1 above, second mean all 1.
    Asymmetric,
}

/// First-segment mean of the order-2 designs, row-major `p1 x p2`.
pub fn matrix_design_mean(design: MatrixDesign, p1: usize, p2: usize) -> Vec<f64> {
    match design {
        MatrixDesign::Symmetric => vec![1.4; p1 * p2],
        MatrixDesign::Asymmetric => {
            let mut m = vec![1.0; p1 * p2];
            for i in 0..p1 {
                for j in 0..=i.min(p2 - 1) {
                    m[i * p2 + j] = 0.8f64.powi((i - j) as i32);
                }
            }
            m
        }
    }
}

/// Order-2 designs; rows of the noise are independent `N(0, Σ̃)` with
/// `Σ̃ = 0.8^|i-j|` when `correlated_rows`, identity otherwise.
pub fn gen_order2(
    p1: usize,
    p2: usize,
    design: MatrixDesign,
    correlated_rows: bool,
    seed: u64,
) -> Result<(TensorSeq, SimSpec)> {
    if p1 == 0 || p2 == 0 {
        return Err(Error::argument("matrix dimensions must be positive"));
    }
    match design {
        MatrixDesign::Symmetric if p2 != p1 => {
            return Err(Error::argument(format!("symmetric design needs p2 = p1, got {p1}x{p2}")))
        }
        MatrixDesign::Asymmetric if p2 != 16 * p1 => {
            return Err(Error::argument(format!("asymmetric design needs p2 = 16 p1, got {p1}x{p2}")))
        }
        _ => {}
    }
    let noise = if correlated_rows {
        NoiseModel::RowCorrelated {
            cov: ar1_covariance(p2, ROW_CORRELATION),
        }
    } else {
        NoiseModel::Iid { sigma: 1.0 }
    };
    let spec = SimSpec {
        n: DESIGN_N,
        shape: Shape::new(vec![p1, p2])?,
        changepoints: DESIGN_CHANGEPOINTS.to_vec(),
        means: alternating(
            matrix_design_mean(design, p1, p2),
            vec![1.0; p1 * p2],
            DESIGN_CHANGEPOINTS.len(),
        ),
        noise,
        seed,
    };
    Ok((gen_custom(&spec)?, spec))
}

/// A reproducible experiment design; `generate` draws one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum SimDesign {
    Dense { p: usize, signal: f64 },
    Sparse { p: usize, signal: f64, fraction: f64 },
    Order2 { p1: usize, p2: usize, layout: MatrixDesign, correlated_rows: bool },
    /// Fixed spec; the replication seed replaces `spec.seed`.
    Custom { spec: SimSpec },
}

impl SimDesign {
    pub fn generate(&self, seed: u64) -> Result<(TensorSeq, SimSpec)> {
        match self {
            Self::Dense { p, signal } => gen_dense_order1(*p, *signal, seed),
            Self::Sparse { p, signal, fraction } => gen_sparse_order1(*p, *signal, *fraction, seed),
            Self::Order2 {
                p1,
                p2,
                layout,
                correlated_rows,
            } => gen_order2(*p1, *p2, *layout, *correlated_rows, seed),
            Self::Custom { spec } => {
                let spec = SimSpec {
                    seed,
                    ..spec.clone()
                };
                Ok((gen_custom(&spec)?, spec))
            }
        }
    }

    /// Number of true change points in every replication.
    pub fn k_true(&self) -> usize {
        match self {
            Self::Custom { spec } => spec.k(),
            _ => DESIGN_CHANGEPOINTS.len(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Dense { p, signal } => format!("dense p={p} signal={signal}"),
            Self::Sparse { p, signal, fraction } => format!("sparse p={p} signal={signal} frac={fraction}"),
            Self::Order2 { p1, p2, layout, correlated_rows } => format!(
                "{} p1={p1} p2={p2}{}",
                match layout {
                    MatrixDesign::Symmetric => "symmetric",
                    MatrixDesign::Asymmetric => "asymmetric",
                },
                if *correlated_rows { " rowcorr" } else { "" }
            ),
            Self::Custom { spec } => format!("custom n={} dims={:?} K={}", spec.n, spec.shape.dims(), spec.k()),
        }
    }
}

/// Independent 64-bit seed for replication `index` of a master seed (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
