//! Higher-order gate and the second-order pair search.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::delta::{combine, full_losses, masked_losses, pair_baseline};
use super::screen::CandidatePairs;
use super::SfitConfig;
use crate::data::{Dataset, MaskFill};
use crate::error::{invalid, Result};
use crate::loss::LossKind;
use crate::model::PredictiveModel;
use crate::par::map_slice;
use crate::sign_test::{sign_test, CiPolicy, SignTestOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    /// Features kept unmasked in the restricted model.
    pub included: BTreeSet<usize>,
    pub outcome: SignTestOutcome,
    pub passed: bool,
}

/// Tests whether the unrestricted model beats the model restricted to
/// `included`: `Δ = L(μ(X masked to included)) - L(μ(X))`, no β shrinkage.
pub fn global_higher_order_check<M>(
    model: &M,
    d2: &Dataset,
    included: &BTreeSet<usize>,
    alpha: f64,
    loss: &LossKind,
    fill: MaskFill,
) -> Result<GateOutcome>
where
    M: PredictiveModel + ?Sized,
{
    let restricted = masked_losses(model, d2, included, fill, loss)?;
    let full = full_losses(model, d2, loss)?;
    let outcome = sign_test(&combine(&restricted, &full, 0.0), alpha, Some(CiPolicy::Auto))?;
    let passed = outcome.p_value < alpha;
    Ok(GateOutcome { included: included.clone(), outcome, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub j: usize,
    pub k: usize,
    /// Whether the baseline kept `k` (first-order significant partner).
    pub k_in_s1: bool,
    pub outcome: SignTestOutcome,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfitSecondOrderReport {
    pub gate: GateOutcome,
    pub pairs: Vec<PairResult>,
    /// Second-order significant features.
    pub significant: BTreeSet<usize>,
    pub significant_pairs: Vec<(usize, usize)>,
    pub candidates: CandidatePairs,
    pub exhaustive: bool,
    pub beta: f64,
    /// Gate for effects beyond the features found so far; run only when the
    /// search ran.
    pub next_gate: Option<GateOutcome>,
}

impl SfitSecondOrderReport {
    /// Significant pairs as unordered `(min, max)` tuples, sorted.
    pub fn unordered_pairs(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.significant_pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Second-order search over features that were not first-order significant.
///
/// Returns early with an empty result when the global gate fails. With
/// `exhaustive` every feature is paired, not only the non-significant ones;
/// each unordered pair is then tested once and pairs of two first-order
/// significant features are skipped.
pub fn sfit_second_order<M>(
    model: &M,
    d2: &Dataset,
    cfg: &SfitConfig,
    s1: &BTreeSet<usize>,
    candidates: &CandidatePairs,
    exhaustive: bool,
) -> Result<SfitSecondOrderReport>
where
    M: PredictiveModel + ?Sized,
{
    cfg.validate()?;
    let p = d2.x.feature_count();
    if candidates.feature_count() != p {
        return Err(invalid(format!("candidate lists cover {} features, data has {p}", candidates.feature_count())));
    }
    for (j, list) in candidates.lists.iter().enumerate() {
        if list.iter().any(|&k| k == j || k == 0 || k > p) {
            return Err(invalid(format!("malformed partner list for feature {j}")));
        }
    }

    let gate = global_higher_order_check(model, d2, s1, cfg.alpha, &cfg.loss, cfg.fill)?;
    let mut report = SfitSecondOrderReport {
        gate,
        pairs: Vec::new(),
        significant: BTreeSet::new(),
        significant_pairs: Vec::new(),
        candidates: candidates.clone(),
        exhaustive,
        beta: cfg.beta,
        next_gate: None,
    };
    if !report.gate.passed {
        return Ok(report);
    }

    let u1: Vec<usize> = (1..=p).filter(|j| !s1.contains(j)).collect();
    let outer: Vec<usize> = if exhaustive { (1..=p).collect() } else { u1.clone() };

    // baseline losses keyed by the baseline set, computed once each
    let mut baselines: HashMap<BTreeSet<usize>, Vec<f64>> = HashMap::new();
    let mut tested: BTreeSet<(usize, usize)> = BTreeSet::new();

    for &j in &outer {
        if !exhaustive && report.significant.contains(&j) {
            continue;
        }
        let ks: Vec<usize> = candidates
            .partners(j)
            .iter()
            .copied()
            .filter(|&k| {
                !exhaustive || (!tested.contains(&(k.min(j), k.max(j))) && !(s1.contains(&j) && s1.contains(&k)))
            })
            .collect();
        for &k in &ks {
            tested.insert((k.min(j), k.max(j)));
            let b = pair_baseline(j, k, s1);
            if let Entry::Vacant(slot) = baselines.entry(b) {
                let losses = masked_losses(model, d2, slot.key(), cfg.fill, &cfg.loss)?;
                slot.insert(losses);
            }
        }
        let introduced: Vec<Result<Vec<f64>>> = map_slice(cfg.exec, &ks, |&k| {
            masked_losses(model, d2, &BTreeSet::from([j, k]), cfg.fill, &cfg.loss)
        });
        for (&k, with) in ks.iter().zip(introduced) {
            let base = &baselines[&pair_baseline(j, k, s1)];
            let delta = combine(base, &with?, cfg.beta);
            let mut outcome = sign_test(&delta, cfg.alpha, None)?;
            let significant = outcome.p_value < cfg.alpha;
            if significant || cfg.ci_for_all {
                outcome = sign_test(&delta, cfg.alpha, Some(cfg.ci_policy))?;
            }
            if significant {
                if !s1.contains(&j) {
                    report.significant.insert(j);
                }
                if !s1.contains(&k) {
                    report.significant.insert(k);
                }
                report.significant_pairs.push((j, k));
            }
            report.pairs.push(PairResult { j, k, k_in_s1: s1.contains(&k), outcome, significant });
        }
    }

    let mut found: BTreeSet<usize> = s1.clone();
    found.extend(&report.significant);
    report.next_gate = Some(global_higher_order_check(model, d2, &found, cfg.alpha, &cfg.loss, cfg.fill)?);
    Ok(report)
}
