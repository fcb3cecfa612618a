//! Loss-difference series on masked inputs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{mask_values, Dataset, MaskFill};
use crate::error::{invalid, Error, Result};
use crate::loss::{row_losses, LossKind};
use crate::model::PredictiveModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DeltaTarget {
    /// One feature, or a group of columns tested together.
    Feature { columns: Vec<usize> },
    Pair { j: usize, k: usize },
    /// Restricted-versus-full comparison of the higher-order gate.
    Gate { included: Vec<usize> },
}

/// Per-row loss differences on the inference set, in row order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub target: DeltaTarget,
    pub beta: f64,
    pub values: Vec<f64>,
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(invalid(format!("beta {beta} outside [0, 1)")));
    }
    Ok(())
}

/// Row losses of the model on `data` with only `active` columns (plus the
/// intercept) left in place. One prediction pass.
pub fn masked_losses<M>(model: &M, data: &Dataset, active: &BTreeSet<usize>, fill: MaskFill, loss: &LossKind) -> Result<Vec<f64>>
where
    M: PredictiveModel + ?Sized,
{
    if model.input_width() != data.x.width() {
        return Err(Error::DimensionMismatch { expected: model.input_width(), found: data.x.width() });
    }
    let spec = fill.spec(active.iter().copied())?;
    let masked = mask_values(data.x.values(), data.x.schema(), &spec)?;
    let preds = model.predict(masked.view())?;
    row_losses(loss, &data.y, preds.view())
}

/// Row losses on the unmasked inputs.
pub fn full_losses<M>(model: &M, data: &Dataset, loss: &LossKind) -> Result<Vec<f64>>
where
    M: PredictiveModel + ?Sized,
{
    if model.input_width() != data.x.width() {
        return Err(Error::DimensionMismatch { expected: model.input_width(), found: data.x.width() });
    }
    let preds = model.predict(data.x.values())?;
    row_losses(loss, &data.y, preds.view())
}

/// `(1 - β) · baseline - introduced`, element-wise.
pub fn combine(baseline: &[f64], introduced: &[f64], beta: f64) -> Vec<f64> {
    baseline.iter().zip(introduced).map(|(b, l)| (1.0 - beta) * b - l).collect()
}

/// First-order Δ for the columns in `columns` against `baseline_set`
/// (the intercept is always part of the baseline).
pub fn delta_first_order<M>(
    model: &M,
    data: &Dataset,
    columns: &[usize],
    beta: f64,
    loss: &LossKind,
    baseline_set: &BTreeSet<usize>,
    fill: MaskFill,
) -> Result<DeltaSeries>
where
    M: PredictiveModel + ?Sized,
{
    check_beta(beta)?;
    for &j in columns {
        if j == 0 {
            return Err(invalid("the intercept cannot be tested"));
        }
        if baseline_set.contains(&j) {
            return Err(invalid(format!("column {j} is already in the baseline set")));
        }
    }
    let base = masked_losses(model, data, baseline_set, fill, loss)?;
    let mut with: BTreeSet<usize> = baseline_set.clone();
    with.extend(columns);
    let introduced = masked_losses(model, data, &with, fill, loss)?;
    Ok(DeltaSeries {
        target: DeltaTarget::Feature { columns: columns.to_vec() },
        beta,
        values: combine(&base, &introduced, beta),
    })
}

/// Baseline used when testing pair `(j, k)`: `{k}` when `k` is first-order
/// significant, otherwise the intercept alone. In exhaustive mode a
/// significant `j` paired with a non-significant `k` uses `{j}`.
pub(crate) fn pair_baseline(j: usize, k: usize, s1: &BTreeSet<usize>) -> BTreeSet<usize> {
    if s1.contains(&k) {
        BTreeSet::from([k])
    } else if s1.contains(&j) {
        BTreeSet::from([j])
    } else {
        BTreeSet::new()
    }
}

/// Second-order Δ for the pair `(j, k)`.
#[allow(clippy::too_many_arguments)]
pub fn delta_pair<M>(
    model: &M,
    data: &Dataset,
    j: usize,
    k: usize,
    s1: &BTreeSet<usize>,
    beta: f64,
    loss: &LossKind,
    fill: MaskFill,
) -> Result<DeltaSeries>
where
    M: PredictiveModel + ?Sized,
{
    check_beta(beta)?;
    if j == k {
        return Err(invalid("pair needs two distinct features"));
    }
    if j == 0 || k == 0 {
        return Err(invalid("the intercept cannot be part of a pair"));
    }
    let baseline = pair_baseline(j, k, s1);
    let base = masked_losses(model, data, &baseline, fill, loss)?;
    let introduced = masked_losses(model, data, &BTreeSet::from([j, k]), fill, loss)?;
    Ok(DeltaSeries { target: DeltaTarget::Pair { j, k }, beta, values: combine(&base, &introduced, beta) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DesignMatrix, FeatureSchema, TargetVector};
    use crate::model::RowFnModel;
    use ndarray::array;

    fn linear() -> impl PredictiveModel {
        RowFnModel::new(3, 1, |x| vec![2.0 * x[0] + x[1] + x[2]])
    }

    fn one_row() -> Dataset {
        let x = DesignMatrix::new(array![[1.0, 3.0, 4.0]], FeatureSchema::numeric(2)).unwrap();
        Dataset::new(x, TargetVector::regression(vec![9.0])).unwrap()
    }

    #[test]
    fn hand_computed_delta() {
        let m = linear();
        let d = one_row();
        let s = delta_first_order(&m, &d, &[1], 0.0, &LossKind::AbsoluteDeviation, &BTreeSet::new(), MaskFill::default()).unwrap();
        assert_eq!(s.values, vec![3.0]);
        let s = delta_first_order(&m, &d, &[1], 0.1, &LossKind::AbsoluteDeviation, &BTreeSet::new(), MaskFill::default()).unwrap();
        assert!((s.values[0] - 2.3).abs() < 1e-12);
    }

    #[test]
    fn ignored_feature_gives_zero() {
        let m = RowFnModel::new(3, 1, |x| vec![x[0] + 5.0 * x[1]]);
        let d = one_row();
        let s = delta_first_order(&m, &d, &[2], 0.0, &LossKind::AbsoluteDeviation, &BTreeSet::new(), MaskFill::default()).unwrap();
        assert_eq!(s.values, vec![0.0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = linear();
        let d = one_row();
        let l = LossKind::AbsoluteDeviation;
        let f = MaskFill::default();
        assert!(delta_first_order(&m, &d, &[0], 0.0, &l, &BTreeSet::new(), f).is_err());
        assert!(delta_first_order(&m, &d, &[1], 1.0, &l, &BTreeSet::new(), f).is_err());
        assert!(delta_first_order(&m, &d, &[1], 0.0, &l, &BTreeSet::from([1]), f).is_err());
        assert!(delta_pair(&m, &d, 1, 1, &BTreeSet::new(), 0.0, &l, f).is_err());
        assert!(delta_pair(&m, &d, 0, 1, &BTreeSet::new(), 0.0, &l, f).is_err());
    }

    #[test]
    fn pair_branches() {
        // mu = x1 * x2 + x1
        let m = RowFnModel::new(3, 1, |x| vec![x[1] * x[2] + x[1]]);
        let d = one_row(); // y = 9, x = (3, 4): full prediction 15
        let l = LossKind::AbsoluteDeviation;
        let f = MaskFill::default();
        // neither significant: |9 - 0| - |9 - 15|
        let s = delta_pair(&m, &d, 2, 1, &BTreeSet::new(), 0.0, &l, f).unwrap();
        assert_eq!(s.values, vec![3.0]);
        // k = 1 significant: baseline keeps x1 -> |9 - 3| - |9 - 15|
        let s = delta_pair(&m, &d, 2, 1, &BTreeSet::from([1]), 0.0, &l, f).unwrap();
        assert_eq!(s.values, vec![0.0]);
    }
}
