//! Step-up false discovery rate control.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdrMethod {
    /// Benjamini–Yekutieli, valid under arbitrary dependence.
    By,
    /// Benjamini–Hochberg.
    Bh,
    /// Per-test threshold `p < alpha`.
    #[default]
    None,
}

impl FdrMethod {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "by" | "BY" => Ok(FdrMethod::By),
            "bh" | "BH" => Ok(FdrMethod::Bh),
            "none" => Ok(FdrMethod::None),
            other => Err(invalid(format!("unknown FDR method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdrDecision {
    pub p_values: Vec<f64>,
    /// Indices into `p_values` of the rejected hypotheses, in ascending
    /// p-value order. Always a prefix of the sorted order.
    pub rejected: Vec<usize>,
    pub method: FdrMethod,
    /// The p-value cutoff that was effectively applied.
    pub threshold: f64,
}

impl FdrDecision {
    pub fn is_rejected(&self, index: usize) -> bool {
        self.rejected.contains(&index)
    }
}

/// Harmonic number `c(m) = Σ_{j=1..m} 1/j`.
pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|j| 1.0 / j as f64).sum()
}

pub fn fdr_adjust(p_values: &[f64], alpha: f64, method: FdrMethod) -> Result<FdrDecision> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));

    let (count, threshold) = match method {
        FdrMethod::None => (order.iter().take_while(|&&i| p_values[i] < alpha).count(), alpha),
        FdrMethod::By | FdrMethod::Bh => {
            let c = if method == FdrMethod::By { harmonic(m) } else { 1.0 };
            let cutoff = |rank: usize| rank as f64 * alpha / (m as f64 * c);
            let largest = order
                .iter()
                .enumerate()
                .rev()
                .find(|(r, &i)| p_values[i] <= cutoff(r + 1))
                .map(|(r, _)| r + 1)
                .unwrap_or(0);
            (largest, if largest > 0 { cutoff(largest) } else { cutoff(1) })
        }
    };
    Ok(FdrDecision {
        p_values: p_values.to_vec(),
        rejected: order[..count].to_vec(),
        method,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn by_rejects_none() {
        let d = fdr_adjust(&[0.01, 0.02, 0.04], 0.05, FdrMethod::By).unwrap();
        assert!(d.rejected.is_empty());
        assert!((harmonic(3) - 1.8333333333333333).abs() < 1e-15);
    }

    #[test]
    fn by_rejects_smallest() {
        let d = fdr_adjust(&[0.2, 0.001, 0.9], 0.05, FdrMethod::By).unwrap();
        assert_eq!(d.rejected, vec![1]);
        assert!((d.threshold - 0.05 / (3.0 * harmonic(3))).abs() < 1e-15);
    }

    #[test]
    fn bh_step_up() {
        // 0.03 > 2*0.05/4 but 0.036 <= 3*0.05/4 lets the first three through
        let d = fdr_adjust(&[0.01, 0.036, 0.03, 0.5], 0.05, FdrMethod::Bh).unwrap();
        assert_eq!(d.rejected, vec![0, 2, 1]);
    }

    #[test]
    fn none_is_passthrough() {
        let d = fdr_adjust(&[0.01, 0.06, 0.049], 0.05, FdrMethod::None).unwrap();
        assert_eq!(d.rejected, vec![0, 2]);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(fdr_adjust(&[], 0.05, FdrMethod::By).unwrap().rejected.is_empty());
        assert!(fdr_adjust(&[1.2], 0.05, FdrMethod::By).is_err());
    }

    proptest! {
        #[test]
        fn by_subset_of_bh(ps in proptest::collection::vec(0.0f64..=1.0, 0..40), alpha in 0.001f64..0.5) {
            let by = fdr_adjust(&ps, alpha, FdrMethod::By).unwrap();
            let bh = fdr_adjust(&ps, alpha, FdrMethod::Bh).unwrap();
            for i in &by.rejected {
                prop_assert!(bh.rejected.contains(i));
            }
            // prefix property
            let mut sorted = ps.clone();
            sorted.sort_by(f64::total_cmp);
            for (r, &i) in by.rejected.iter().enumerate() {
                prop_assert_eq!(ps[i], sorted[r]);
            }
        }
    }
}
