//! Finite-sample sign-test inference on a series of loss differences.

mod binomial;
mod ci;
mod fdr;
mod quantile;

pub use binomial::{binom_cdf, binom_test_greater, sign_interval_coverage};
pub use ci::{
    asymptotic_ci, asymptotic_indices, exact_ci, interval, CiMethod, CiPolicy, ConfidenceInterval,
    ASYMPTOTIC_MIN_N,
};
pub use fdr::{fdr_adjust, harmonic, FdrDecision, FdrMethod};
pub use quantile::normal_quantile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of a one-sided sign test on one feature or pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTestOutcome {
    /// Number of strictly positive differences. Zeros count as failures.
    pub n_plus: usize,
    pub n2: usize,
    pub p_value: f64,
    /// Sample median of the differences.
    pub statistic: f64,
    pub alpha: f64,
    pub ci: Option<ConfidenceInterval>,
}

impl SignTestOutcome {
    pub fn significant(&self) -> bool {
        self.p_value < self.alpha
    }
}

/// Median; the midpoint of the two central order statistics for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median of an empty series".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(median_sorted(&v))
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One-sided (greater) sign test of `median > 0`, optionally with an interval.
pub fn sign_test(deltas: &[f64], alpha: f64, ci: Option<CiPolicy>) -> Result<SignTestOutcome> {
    if deltas.is_empty() {
        return Err(Error::Empty("sign test on an empty series".into()));
    }
    let n_plus = deltas.iter().filter(|&&d| d > 0.0).count();
    let n2 = deltas.len();
    let p_value = binom_test_greater(n_plus as u64, n2 as u64, 0.5)?;
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let statistic = median_sorted(&sorted);
    let ci = match ci {
        Some(policy) if n2 >= 3 => Some(interval(&sorted, alpha, policy)?),
        _ => None,
    };
    Ok(SignTestOutcome { n_plus, n2, p_value, statistic, alpha, ci })
}
