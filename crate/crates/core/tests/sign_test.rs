use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use sfit::sign_test::{exact_ci, interval, sign_test, CiMethod, CiPolicy};

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

// coverage of the median; tolerance is four binomial standard errors
fn check_coverage(n: usize, alpha: f64, reps: usize, seed: u64, draw: impl Fn(&mut ChaCha8Rng) -> f64, median: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    let mut level = None;
    for _ in 0..reps {
        let s = sorted((0..n).map(|_| draw(&mut rng)).collect());
        let ci = exact_ci(&s, alpha).unwrap();
        level = ci.coverage;
        if ci.lower <= median && median <= ci.upper {
            hits += 1;
        }
    }
    let level = level.unwrap();
    let rate = hits as f64 / reps as f64;
    let se = (level * (1.0 - level) / reps as f64).sqrt();
    assert!((rate - level).abs() <= 4.0 * se, "n {n}: coverage {rate} vs {level}");
    assert!(level >= 1.0 - alpha);
}

#[test]
fn exact_interval_coverage_normal() {
    check_coverage(25, 0.1, 20_000, 1, |r| r.sample::<f64, _>(StandardNormal), 0.0);
}

#[test]
fn exact_interval_coverage_skewed() {
    // Exp(1) has median ln 2
    check_coverage(40, 0.05, 20_000, 2, |r| r.sample::<f64, _>(Exp1), std::f64::consts::LN_2);
}

#[test]
fn auto_policy_switches_at_thirty() {
    let s29 = sorted((0..29).map(f64::from).collect());
    let s30 = sorted((0..30).map(f64::from).collect());
    assert_eq!(interval(&s29, 0.05, CiPolicy::Auto).unwrap().method, CiMethod::Exact);
    assert_eq!(interval(&s30, 0.05, CiPolicy::Auto).unwrap().method, CiMethod::Asymptotic);
}

#[test]
fn ties_count_against_the_feature() {
    let zeros = vec![0.0; 50];
    let out = sign_test(&zeros, 0.05, None).unwrap();
    assert_eq!(out.n_plus, 0);
    assert_eq!(out.p_value, 1.0);
    assert!(!out.significant());

    let mut d = vec![0.0; 20];
    d.extend(vec![1.0; 10]);
    let out = sign_test(&d, 0.05, None).unwrap();
    assert_eq!(out.n_plus, 10);
    assert!(out.p_value > 0.9);
}

#[test]
fn interval_contains_the_statistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [5usize, 17, 31, 200, 1001] {
        let d: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + 0.3).collect();
        for policy in [CiPolicy::Exact, CiPolicy::Asymptotic] {
            let out = sign_test(&d, 0.05, Some(policy)).unwrap();
            let ci = out.ci.unwrap();
            assert!(ci.lower <= out.statistic && out.statistic <= ci.upper, "n {n} {policy:?}");
            assert!(ci.lower_index >= 1 && ci.upper_index <= n);
        }
    }
}
