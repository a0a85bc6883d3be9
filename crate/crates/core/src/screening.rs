// SPDX-License-Identifier: MIT OR Apache-2.0

//! Signal-screening norm, its thresholds and the recommended tuning constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which distance drives detection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    /// Screened Frobenius distance over every element.
    #[default]
    Sfd,
    /// Slice-wise screened distances along a structural mode, min-combined.
    Msfd,
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sfd" => Ok(Self::Sfd),
            "msfd" => Ok(Self::Msfd),
            other => Err(Error::config(format!("unknown mode '{other}' (expected sfd or msfd)"))),
        }
    }
}

impl std::fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sfd => "sfd",
            Self::Msfd => "msfd",
        })
    }
}

/// Growth factor multiplying `s1 * ε_n` in the ridge numerator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeScale {
    /// `(log n)^ν`
    Log,
    /// `n^ν`
    Power,
}

impl std::str::FromStr for RidgeScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "log" => Ok(Self::Log),
            "power" => Ok(Self::Power),
            other => Err(Error::config(format!(
                "unknown ridge scale '{other}' (expected log or power)"
            ))),
        }
    }
}

impl std::fmt::Display for RidgeScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Log => "log",
            Self::Power => "power",
        })
    }
}

pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_NU: f64 = 0.55;
pub const DEFAULT_S1: f64 = 1.0 / 50.0;
pub const SFD_S_FACTOR: f64 = 2.5;
pub const MSFD_S_FACTOR: f64 = 10.0;
pub const MIN_N: usize = 30;

/// Resolved tuning constants for one sequence length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningParams {
    pub n: usize,
    pub alpha: usize,
    pub eps: f64,
    pub s: f64,
    pub s1: f64,
    pub nu: f64,
    pub ridge_scale: RidgeScale,
}

impl ScreeningParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.alpha == 0 {
            return Err(Error::config("n and alpha must be positive"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.nu > 0.5 && self.nu.is_finite()) {
            return Err(Error::config(format!("nu must be > 1/2, got {}", self.nu)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::config(format!("s must be > 0, got {}", self.s)));
        }
        if !(self.s1 > 0.0 && self.s1.is_finite()) {
            return Err(Error::config(format!("s1 must be > 0, got {}", self.s1)));
        }
        if self.n < 2 {
            return Err(Error::config("n must be at least 2 so that log n > 0"));
        }
        Ok(())
    }

    fn log_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    /// `ε_n = (log n)^(1/2 + ε) / sqrt(α)`.
    pub fn eps_n(&self) -> f64 {
        self.log_n().powf(0.5 + self.eps) / (self.alpha as f64).sqrt()
    }

    /// Screening threshold `l_n(s) = s ε_n (log n)^(1/2)` on squared entries.
    pub fn threshold(&self) -> f64 {
        self.s * self.eps_n() * self.log_n().sqrt()
    }

    /// `s1 ε_n g(n)`, the ridge before division by `1{i in S} + 1/n`.
    pub fn ridge_numerator(&self) -> f64 {
        let growth = match self.ridge_scale {
            RidgeScale::Log => self.log_n().powf(self.nu),
            RidgeScale::Power => (self.n as f64).powf(self.nu),
        };
        self.s1 * self.eps_n() * growth
    }
}

/// `⌊2 n^(3/4) / 9⌋`, floored at 1.
pub fn default_alpha(n: usize) -> usize {
    ((2.0 * (n as f64).powf(0.75) / 9.0).floor() as usize).max(1)
}

/// User-supplied replacements for the recommended constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub alpha: Option<usize>,
    pub eps: Option<f64>,
    pub nu: Option<f64>,
    pub s: Option<f64>,
    pub s1: Option<f64>,
    pub ridge_scale: Option<RidgeScale>,
}

/// Fills in the recommended constants for `mode`, then applies `overrides`.
///
/// When `s1` is overridden but `s` is not, `s` follows it through the mode's
/// ratio (2.5 for SFD, 10 for MSFD).
pub fn derive_params(n: usize, mode: DetectionMode, overrides: &ParamOverrides) -> Result<ScreeningParams> {
    if n < MIN_N {
        return Err(Error::config(format!("need at least {MIN_N} observations, got {n}")));
    }
    let s1 = overrides.s1.unwrap_or(DEFAULT_S1);
    let factor = match mode {
        DetectionMode::Sfd => SFD_S_FACTOR,
        DetectionMode::Msfd => MSFD_S_FACTOR,
    };
    let params = ScreeningParams {
        n,
        alpha: overrides.alpha.unwrap_or_else(|| default_alpha(n)),
        eps: overrides.eps.unwrap_or(DEFAULT_EPS),
        s: overrides.s.unwrap_or(factor * s1),
        s1,
        nu: overrides.nu.unwrap_or(DEFAULT_NU),
        ridge_scale: overrides.ridge_scale.unwrap_or(RidgeScale::Log),
    };
    params.validate()?;
    Ok(params)
}

/// Sum of squares and count of entries whose square exceeds `l` (strictly).
#[inline]
pub fn screen<'a>(values: impl IntoIterator<Item = &'a f64>, l: f64) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &v in values {
        let sq = v * v;
        if sq > l {
            sum += sq;
            count += 1;
        }
    }
    (sum, count)
}

#[inline]
pub(crate) fn norm_from_parts(sum: f64, count: usize, n: usize) -> f64 {
    sum / (count as f64 + 1.0 / n as f64)
}

/// Screened squared norm: mean of the squares above `l`, with `1/n` added to the count.
pub fn screening_norm(values: &[f64], l: f64, n: usize) -> f64 {
    let (sum, count) = screen(values, l);
    norm_from_parts(sum, count, n)
}

/// Whether any entry's square exceeds `l`.
pub fn in_signal_set(values: &[f64], l: f64) -> bool {
    values.iter().any(|&v| v * v > l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn norm_examples() {
        assert_eq!(screening_norm(&[0.0; 7], 0.1, 100), 0.0);
        assert_relative_eq!(screening_norm(&[2.0], 1.0, 100), 4.0 / 1.01, max_relative = 1e-15);
        assert_relative_eq!(
            screening_norm(&[0.5, 2.0, 3.0], 1.0, 1000),
            13.0 / 2.001,
            max_relative = 1e-15
        );
        assert_relative_eq!(screening_norm(&[0.5, 2.0, 3.0], 1.0, 1000), 6.496_751_624_187_906, epsilon = 1e-12);
    }

    #[test]
    fn threshold_ties_are_excluded() {
        assert_eq!(screening_norm(&[1.0], 1.0, 10), 0.0);
        assert!(!in_signal_set(&[1.0], 1.0));
    }

    #[test]
    fn membership_examples() {
        assert!(!in_signal_set(&[0.0, 0.0], 0.0));
        assert!(in_signal_set(&[0.05], 0.0016));
        assert!(!in_signal_set(&[0.03], 0.0016));
    }

    #[test]
    fn recommended_constants() {
        // 1800^(3/4) = 276.3467..., times 2/9 = 61.41...
        assert_relative_eq!(1800f64.powf(0.75), 276.346_761_095_814, epsilon = 1e-9);
        let p = derive_params(1800, DetectionMode::Sfd, &ParamOverrides::default()).unwrap();
        assert_eq!(p.alpha, 61);
        assert_relative_eq!(p.s1, 0.02);
        assert_relative_eq!(p.s, 0.05, epsilon = 1e-15);
        assert_relative_eq!(p.nu, 0.55);
        assert_eq!(p.ridge_scale, RidgeScale::Log);
        let q = derive_params(1800, DetectionMode::Msfd, &ParamOverrides::default()).unwrap();
        assert_relative_eq!(q.s, 0.2, epsilon = 1e-15);
        assert_eq!(q.ridge_scale, RidgeScale::Log);
    }

    #[test]
    fn eps_n_matches_both_written_forms() {
        // (log n)^(1/2 + 0.05) and (log n)^0.55 are the same number.
        let p = derive_params(1800, DetectionMode::Sfd, &ParamOverrides::default()).unwrap();
        let direct = 1800f64.ln().powf(0.55) / 61f64.sqrt();
        assert_relative_eq!(p.eps_n(), direct, max_relative = 1e-14);
        assert_relative_eq!(p.threshold(), 0.05 * 1800f64.ln().sqrt() * direct, max_relative = 1e-14);
    }

    #[test]
    fn overrides_apply_last_and_validate() {
        let o = ParamOverrides {
            alpha: Some(40),
            s1: Some(0.1),
            ..Default::default()
        };
        let p = derive_params(1800, DetectionMode::Sfd, &o).unwrap();
        assert_eq!(p.alpha, 40);
        assert_relative_eq!(p.s, 0.25, epsilon = 1e-15);
        for bad in [
            ParamOverrides { nu: Some(0.5), ..Default::default() },
            ParamOverrides { eps: Some(0.0), ..Default::default() },
            ParamOverrides { s: Some(-1.0), ..Default::default() },
            ParamOverrides { alpha: Some(0), ..Default::default() },
        ] {
            assert!(matches!(derive_params(1800, DetectionMode::Sfd, &bad), Err(Error::Config(_))));
        }
        assert!(derive_params(29, DetectionMode::Sfd, &ParamOverrides::default()).is_err());
    }

    proptest! {
        #[test]
        fn scale_covariance(v in prop::collection::vec(-10.0f64..10.0, 1..40), l in 0.0f64..5.0, c in 0.1f64..10.0, n in 1usize..5000) {
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            let lhs = screening_norm(&scaled, c * c * l, n);
            let rhs = c * c * screening_norm(&v, l, n);
            // c^2 v^2 > c^2 l can round differently from v^2 > l only at exact ties
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }

        #[test]
        fn raising_threshold_only_removes_terms(v in prop::collection::vec(-3.0f64..3.0, 1..40), l1 in 0.0f64..4.0, dl in 0.0f64..4.0) {
            let l2 = l1 + dl;
            let kept1: Vec<usize> = (0..v.len()).filter(|&j| v[j] * v[j] > l1).collect();
            let kept2: Vec<usize> = (0..v.len()).filter(|&j| v[j] * v[j] > l2).collect();
            prop_assert!(kept2.iter().all(|j| kept1.contains(j)));
            let (s1, c1) = screen(&v, l1);
            let (s2, c2) = screen(&v, l2);
            prop_assert!(c2 <= c1);
            prop_assert!(s2 <= s1);
        }

        #[test]
        fn zero_threshold_averages_nonzeros(v in prop::collection::vec(prop_oneof![Just(0.0f64), -5.0f64..5.0], 1..30), n in 1usize..10_000) {
            let k = v.iter().filter(|&&x| x != 0.0).count();
            let ss: f64 = v.iter().filter(|&&x| x != 0.0).map(|x| x * x).sum();
            prop_assert_eq!(screening_norm(&v, 0.0, n), ss / (k as f64 + 1.0 / n as f64));
        }
    }
}
