//! Confidence intervals for a median from order statistics.

use serde::{Deserialize, Serialize};

use super::binomial::{half_cdf_table, sign_interval_coverage};
use super::quantile::normal_quantile;
use crate::error::{invalid, Error, Result};

/// Smallest sample size for which the normal-approximation interval is used.
pub const ASYMPTOTIC_MIN_N: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    Exact,
    Asymptotic,
}

/// Which interval construction to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiPolicy {
    /// Asymptotic when `n >= 30`, exact otherwise.
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub method: CiMethod,
    /// 1-based order-statistic indices of the endpoints.
    pub lower_index: usize,
    pub upper_index: usize,
    /// Achieved coverage, known for exact intervals only.
    pub coverage: Option<f64>,
    /// Set when no exact interval reaches the requested level and the
    /// widest interval was returned instead.
    pub level_unattainable: bool,
}

fn check_sorted(sorted: &[f64]) -> Result<()> {
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Unsorted);
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha {alpha} outside (0, 1]")));
    }
    Ok(())
}

/// Exact sign-test interval `[Δ(1+k), Δ(n-k)]` for the largest `k` whose
/// two-sided level `2 P(B <= k)` does not exceed `alpha`.
pub fn exact_ci(sorted: &[f64], alpha: f64) -> Result<ConfidenceInterval> {
    let n = sorted.len();
    if n < 3 {
        return Err(invalid(format!("exact interval needs at least 3 values, got {n}")));
    }
    check_alpha(alpha)?;
    check_sorted(sorted)?;
    let n64 = n as u64;
    let mut chosen: Option<u64> = None;
    // nested intervals need 1 + k <= n - k
    for (k, &cdf) in half_cdf_table(n64, (n64 - 1) / 2).iter().enumerate() {
        if 2.0 * cdf <= alpha {
            chosen = Some(k as u64);
        } else {
            break;
        }
    }
    let (k, unattainable) = match chosen {
        Some(k) => (k, false),
        None => (0, true),
    };
    let (lo, hi) = (1 + k as usize, n - k as usize);
    Ok(ConfidenceInterval {
        lower: sorted[lo - 1],
        upper: sorted[hi - 1],
        method: CiMethod::Exact,
        lower_index: lo,
        upper_index: hi,
        coverage: Some(sign_interval_coverage(k, n64)?),
        level_unattainable: unattainable,
    })
}

/// 1-based order-statistic indices of the normal-approximation interval,
/// clamped to `[1, n]`.
pub fn asymptotic_indices(n: usize, alpha: f64) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::Empty("asymptotic interval".into()));
    }
    check_alpha(alpha)?;
    let q = normal_quantile(1.0 - alpha / 2.0);
    let centre = (n as f64 + 1.0) / 2.0;
    let half = q * (n as f64).sqrt() / 2.0;
    let lo = (centre - half).floor().max(1.0) as usize;
    let hi = ((centre + half).ceil() as usize).min(n);
    Ok((lo.min(n), hi.max(1)))
}

/// Normal-approximation interval; falls back to [`exact_ci`] below
/// [`ASYMPTOTIC_MIN_N`] values.
pub fn asymptotic_ci(sorted: &[f64], alpha: f64) -> Result<ConfidenceInterval> {
    let n = sorted.len();
    if n < ASYMPTOTIC_MIN_N {
        log::warn!("{n} values is too few for the asymptotic interval; using the exact interval");
        return exact_ci(sorted, alpha);
    }
    check_sorted(sorted)?;
    let (lo, hi) = asymptotic_indices(n, alpha)?;
    Ok(ConfidenceInterval {
        lower: sorted[lo - 1],
        upper: sorted[hi - 1],
        method: CiMethod::Asymptotic,
        lower_index: lo,
        upper_index: hi,
        coverage: None,
        level_unattainable: false,
    })
}

pub fn interval(sorted: &[f64], alpha: f64, policy: CiPolicy) -> Result<ConfidenceInterval> {
    match policy {
        CiPolicy::Exact => exact_ci(sorted, alpha),
        CiPolicy::Asymptotic => asymptotic_ci(sorted, alpha),
        CiPolicy::Auto if sorted.len() >= ASYMPTOTIC_MIN_N => asymptotic_ci(sorted, alpha),
        CiPolicy::Auto => exact_ci(sorted, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn exact_level_selection_n10() {
        let ci = exact_ci(&seq(10), 0.05).unwrap();
        assert_eq!((ci.lower_index, ci.upper_index), (2, 9));
        assert_eq!(ci.coverage, Some(0.978515625));
        assert!(!ci.level_unattainable);
    }

    #[test]
    fn exact_unattainable_returns_widest() {
        let ci = exact_ci(&[1.0, 2.0, 3.0], 0.01).unwrap();
        assert_eq!((ci.lower, ci.upper), (1.0, 3.0));
        assert!(ci.level_unattainable);
        assert_eq!(ci.coverage, Some(0.75));
    }

    #[test]
    fn exact_rejects_bad_input() {
        assert!(matches!(exact_ci(&[3.0, 1.0, 2.0], 0.05), Err(Error::Unsorted)));
        assert!(exact_ci(&[1.0, 2.0], 0.05).is_err());
        assert!(exact_ci(&seq(5), 0.0).is_err());
    }

    #[test]
    fn asymptotic_indices_large_n() {
        assert_eq!(asymptotic_indices(10_000, 0.05).unwrap(), (4902, 5099));
        // q = 0 collapses onto the central order statistics
        assert_eq!(asymptotic_indices(10_000, 1.0).unwrap(), (5000, 5001));
        assert_eq!(asymptotic_indices(11, 1.0).unwrap(), (6, 6));
    }

    #[test]
    fn asymptotic_indices_clamped() {
        for n in 1..200 {
            for alpha in [1e-12, 1e-6, 0.01, 0.05, 0.5, 1.0] {
                let (lo, hi) = asymptotic_indices(n, alpha).unwrap();
                assert!(1 <= lo && lo <= hi && hi <= n, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn asymptotic_small_n_falls_back() {
        let ci = asymptotic_ci(&seq(10), 0.05).unwrap();
        assert_eq!(ci.method, CiMethod::Exact);
        let ci = asymptotic_ci(&seq(100), 0.05).unwrap();
        assert_eq!(ci.method, CiMethod::Asymptotic);
        assert!(ci.lower <= 50.5 && 50.5 <= ci.upper);
    }
}
