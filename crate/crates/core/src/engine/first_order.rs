use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::delta::{combine, masked_losses};
use super::{SfitConfig, MIN_RECOMMENDED_N2};
use crate::data::{partition, ColumnKind, Dataset, FeatureSchema, PartitionKey};
use crate::error::{Error, Result};
use crate::model::PredictiveModel;
use crate::par::map_slice;
use crate::sign_test::{fdr_adjust, sign_test, FdrDecision, FdrMethod, SignTestOutcome};

/// A feature column, or a one-hot group tested as a whole.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestUnit {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Units tested by a first-order run, in column order.
pub fn test_units(schema: &FeatureSchema, group_dummies: bool, exclude: &BTreeSet<usize>) -> Vec<TestUnit> {
    let mut units = Vec::new();
    let mut seen_groups = BTreeSet::new();
    for j in 1..schema.width() {
        if exclude.contains(&j) {
            continue;
        }
        let col = &schema.columns()[j];
        match (&col.group, group_dummies && col.kind == ColumnKind::CategoricalDummy) {
            (Some(g), true) => {
                if seen_groups.insert(g.clone()) {
                    let columns = schema
                        .columns()
                        .iter()
                        .enumerate()
                        .filter(|(c, other)| other.group.as_ref() == Some(g) && !exclude.contains(c))
                        .map(|(c, _)| c)
                        .collect();
                    units.push(TestUnit { name: g.clone(), columns });
                }
            }
            _ => units.push(TestUnit { name: col.name.clone(), columns: vec![j] }),
        }
    }
    units
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureResult {
    pub name: String,
    pub columns: Vec<usize>,
    pub outcome: SignTestOutcome,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfitFirstOrderReport {
    pub features: Vec<FeatureResult>,
    /// Columns of every significant unit.
    pub significant: BTreeSet<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub loss: String,
    pub fdr_method: FdrMethod,
    pub fdr: Option<FdrDecision>,
    pub n2: usize,
    pub baseline: BTreeSet<usize>,
}

impl SfitFirstOrderReport {
    pub fn result(&self, column: usize) -> Option<&FeatureResult> {
        self.features.iter().find(|f| f.columns.contains(&column))
    }

    /// Significant units sorted by decreasing statistic.
    pub fn ranking(&self) -> Vec<&FeatureResult> {
        let mut v: Vec<&FeatureResult> = self.features.iter().filter(|f| f.significant).collect();
        v.sort_by(|a, b| b.outcome.statistic.total_cmp(&a.outcome.statistic));
        v
    }
}

/// First-order test over every feature (or unit) not in the baseline set.
///
/// Makes exactly one baseline prediction pass plus one pass per unit.
pub fn sfit_first_order<M>(model: &M, d2: &Dataset, cfg: &SfitConfig) -> Result<SfitFirstOrderReport>
where
    M: PredictiveModel + ?Sized,
{
    cfg.validate()?;
    if d2.is_empty() {
        return Err(Error::Empty("inference set".into()));
    }
    if d2.len() < MIN_RECOMMENDED_N2 {
        log::warn!("inference set has only {} rows; the sign test will have little power", d2.len());
    }
    let units = test_units(d2.x.schema(), cfg.group_dummies, &cfg.baseline);
    let base = masked_losses(model, d2, &cfg.baseline, cfg.fill, &cfg.loss)?;

    let deltas: Vec<Result<Vec<f64>>> = map_slice(cfg.exec, &units, |unit| {
        let mut active = cfg.baseline.clone();
        active.extend(&unit.columns);
        let introduced = masked_losses(model, d2, &active, cfg.fill, &cfg.loss)?;
        Ok(combine(&base, &introduced, cfg.beta))
    });

    let deltas = deltas.into_iter().collect::<Result<Vec<_>>>()?;
    let outcomes = deltas
        .iter()
        .map(|d| sign_test(d, cfg.alpha, None))
        .collect::<Result<Vec<_>>>()?;
    let p_values: Vec<f64> = outcomes.iter().map(|o| o.p_value).collect();
    let decision = fdr_adjust(&p_values, cfg.alpha, cfg.fdr)?;

    let mut features = Vec::with_capacity(units.len());
    let mut significant = BTreeSet::new();
    for (i, ((unit, mut outcome), delta)) in units.into_iter().zip(outcomes).zip(&deltas).enumerate() {
        let sig = decision.is_rejected(i);
        if sig || cfg.ci_for_all {
            outcome = sign_test(delta, cfg.alpha, Some(cfg.ci_policy))?;
        }
        if sig {
            significant.extend(&unit.columns);
        }
        features.push(FeatureResult { name: unit.name, columns: unit.columns, outcome, significant: sig });
    }

    Ok(SfitFirstOrderReport {
        features,
        significant,
        alpha: cfg.alpha,
        beta: cfg.beta,
        loss: cfg.loss.name().to_string(),
        fdr_method: cfg.fdr,
        fdr: (cfg.fdr != FdrMethod::None).then_some(decision),
        n2: d2.len(),
        baseline: cfg.baseline.clone(),
    })
}

/// Runs the first-order test separately on each class or subgroup.
pub fn sfit_partitioned<M>(
    model: &M,
    d2: &Dataset,
    key: &PartitionKey,
    cfg: &SfitConfig,
) -> Result<Vec<(String, SfitFirstOrderReport)>>
where
    M: PredictiveModel + ?Sized,
{
    partition(d2, key)?
        .into_iter()
        .map(|(label, part)| {
            if part.is_empty() {
                return Err(Error::EmptyPartition(label));
            }
            if part.len() < MIN_RECOMMENDED_N2 {
                log::warn!("partition '{label}' has only {} rows", part.len());
            }
            Ok((label, sfit_first_order(model, &part, cfg)?))
        })
        .collect()
}
