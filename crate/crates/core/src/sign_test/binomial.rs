//! Binomial tail probabilities.
//!
//! For `p0 = 1/2` and `n <= 120` the tails are computed from exact integer
//! sums of binomial coefficients, so the returned value is the correctly
//! rounded double of the rational result. Everything else goes through a
//! log-domain sum.

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

const EXACT_HALF_MAX_N: u64 = 120;

/// `P(B >= k)` for `B ~ Binomial(n, p0)`: the one-sided "greater" p-value.
pub fn binom_test_greater(k: u64, n: u64, p0: f64) -> Result<f64> {
    check(k, n, p0)?;
    if k == 0 {
        return Ok(1.0);
    }
    if p0 == 0.5 && n <= EXACT_HALF_MAX_N {
        let upper: u128 = (k..=n).map(|i| choose_u128(n, i)).sum();
        return Ok(ratio_pow2(upper, n));
    }
    Ok(log_tail(k..=n, n, p0).exp().min(1.0))
}

/// `P(B <= k)` for `B ~ Binomial(n, p0)`.
pub fn binom_cdf(k: u64, n: u64, p0: f64) -> Result<f64> {
    check(k, n, p0)?;
    if k == n {
        return Ok(1.0);
    }
    if p0 == 0.5 && n <= EXACT_HALF_MAX_N {
        let lower: u128 = (0..=k).map(|i| choose_u128(n, i)).sum();
        return Ok(ratio_pow2(lower, n));
    }
    Ok(log_tail(0..=k, n, p0).exp().min(1.0))
}

/// `1 - 2 P(B <= k)` for `B ~ Binomial(n, 1/2)`: the exact coverage of the
/// `k`-th nested order-statistic interval.
pub fn sign_interval_coverage(k: u64, n: u64) -> Result<f64> {
    check(k, n, 0.5)?;
    if n <= EXACT_HALF_MAX_N {
        let lower: u128 = (0..=k).map(|i| choose_u128(n, i)).sum();
        let total = 1u128 << n;
        // may go negative when k is past the centre
        return Ok(if 2 * lower <= total {
            ratio_pow2(total - 2 * lower, n)
        } else {
            -ratio_pow2(2 * lower - total, n)
        });
    }
    Ok(1.0 - 2.0 * binom_cdf(k, n, 0.5)?)
}

fn check(k: u64, n: u64, p0: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("binomial test needs at least one trial"));
    }
    if k > n {
        return Err(invalid(format!("successes {k} exceed trials {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(invalid(format!("success probability {p0} outside (0, 1)")));
    }
    Ok(())
}

fn choose_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c
}

fn ratio_pow2(numerator: u128, n: u64) -> f64 {
    // one rounding in the conversion; scaling by a power of two is exact
    numerator as f64 / 2f64.powi(n as i32)
}

fn log_pmf(i: u64, n: u64, ln_p: f64, ln_q: f64) -> f64 {
    let (nf, fi) = (n as f64, i as f64);
    ln_gamma(nf + 1.0) - ln_gamma(fi + 1.0) - ln_gamma(nf - fi + 1.0) + fi * ln_p + (nf - fi) * ln_q
}

/// `P(B <= k)` for `k = 0..=upto`, `B ~ Binomial(n, 1/2)`, in one pass.
pub(crate) fn half_cdf_table(n: u64, upto: u64) -> Vec<f64> {
    let upto = upto.min(n);
    if n <= EXACT_HALF_MAX_N {
        let mut acc = 0u128;
        return (0..=upto)
            .map(|i| {
                acc += choose_u128(n, i);
                ratio_pow2(acc, n)
            })
            .collect();
    }
    let ln_half = 0.5f64.ln();
    let terms: Vec<f64> = (0..=n).map(|i| log_pmf(i, n, ln_half, ln_half)).collect();
    let total = log_sum_exp(&terms);
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(upto as usize + 1);
    for &t in &terms[..=upto as usize] {
        // terms increase up to the mode, so a running sum loses nothing
        acc += (t - total).exp();
        out.push(acc.min(1.0));
    }
    out
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // sum smallest-first for accuracy
    let mut scaled: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
    scaled.sort_by(|a, b| a.total_cmp(b));
    max + scaled.iter().sum::<f64>().ln()
}

/// Log of the pmf mass on `range`, normalised by the mass over `0..=n` so
/// that complementary tails sum to one despite `ln_gamma` rounding.
fn log_tail(range: std::ops::RangeInclusive<u64>, n: u64, p0: f64) -> f64 {
    let (ln_p, ln_q) = (p0.ln(), (-p0).ln_1p());
    let terms: Vec<f64> = (0..=n).map(|i| log_pmf(i, n, ln_p, ln_q)).collect();
    let (lo, hi) = (*range.start() as usize, *range.end() as usize);
    log_sum_exp(&terms[lo..=hi]) - log_sum_exp(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_values() {
        assert_eq!(binom_test_greater(6, 10, 0.5).unwrap(), 0.376953125);
        assert_eq!(binom_test_greater(0, 10, 0.5).unwrap(), 1.0);
        assert_eq!(binom_test_greater(10, 10, 0.5).unwrap(), 0.0009765625);
    }

    #[test]
    fn table_matches_pointwise() {
        for n in [7u64, 120, 121, 500] {
            let table = half_cdf_table(n, n / 2);
            for (k, &v) in table.iter().enumerate() {
                let direct = binom_cdf(k as u64, n, 0.5).unwrap();
                assert!((v - direct).abs() <= 1e-12 * direct.max(1e-300), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn cdf_values() {
        assert_eq!(binom_cdf(1, 10, 0.5).unwrap(), 11.0 / 1024.0);
        assert_eq!(sign_interval_coverage(1, 10).unwrap(), 0.978515625);
    }

    #[test]
    fn invalid_counts() {
        assert!(binom_test_greater(11, 10, 0.5).is_err());
        assert!(binom_test_greater(0, 0, 0.5).is_err());
        assert!(binom_test_greater(1, 2, 1.0).is_err());
    }

    #[test]
    fn log_path_matches_exact_path() {
        // n = 120 is the last exact size; compare against the log-domain sum
        for k in [0u64, 40, 60, 61, 75, 120] {
            let exact = binom_test_greater(k, 120, 0.5).unwrap();
            let approx = if k == 0 { 1.0 } else { log_tail(k..=120, 120, 0.5).exp() };
            assert!((exact - approx).abs() <= 1e-12 * exact, "k={k}: {exact} vs {approx}");
        }
    }

    #[test]
    fn large_n_tails_are_sane() {
        let n = 10_000;
        let mid = binom_test_greater(5_000, n, 0.5).unwrap();
        assert!((mid - 0.5).abs() < 0.01);
        assert!(binom_test_greater(5_300, n, 0.5).unwrap() < 1e-8);
        let cdf = binom_cdf(4_999, n, 0.5).unwrap();
        assert!((cdf + mid - 1.0).abs() < 1e-12, "{}", cdf + mid - 1.0);
    }

    #[test]
    fn general_probability() {
        // P(B >= 2), n = 3, p = 0.2: 3*0.04*0.8 + 0.008
        let p = binom_test_greater(2, 3, 0.2).unwrap();
        assert!((p - 0.104).abs() < 1e-14);
    }
}
