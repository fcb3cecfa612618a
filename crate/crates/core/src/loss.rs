//! Loss functions shared by training and by the Δ computations.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::TargetVector;
use crate::error::{invalid, Error, Result};

/// Lower bound applied to predicted probabilities before taking a log.
/// Bounds a single cross-entropy term by `-ln(1e-12) ≈ 27.6`.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "weights")]
pub enum LossKind {
    AbsoluteDeviation,
    SquaredError,
    CrossEntropy,
    WeightedCrossEntropy(Vec<f64>),
}

impl LossKind {
    pub fn is_classification(&self) -> bool {
        matches!(self, LossKind::CrossEntropy | LossKind::WeightedCrossEntropy(_))
    }

    /// Parses the identifiers used in config files.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "absolute-deviation" | "absolute" | "l1" => Ok(LossKind::AbsoluteDeviation),
            "squared-error" | "squared" | "mse" => Ok(LossKind::SquaredError),
            "cross-entropy" => Ok(LossKind::CrossEntropy),
            other => Err(invalid(format!("unknown loss kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::AbsoluteDeviation => "absolute-deviation",
            LossKind::SquaredError => "squared-error",
            LossKind::CrossEntropy => "cross-entropy",
            LossKind::WeightedCrossEntropy(_) => "weighted-cross-entropy",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LossKind::WeightedCrossEntropy(w) = self {
            if w.is_empty() || w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(invalid("class weights must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// A single observed response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Real(f64),
    /// Zero-based class index.
    Class(usize),
}

/// Loss of one prediction. `prediction` is the scalar output (length 1) for
/// regression losses or the class-probability vector for cross-entropy.
pub fn loss(kind: &LossKind, y: Target, prediction: &[f64]) -> Result<f64> {
    match (kind, y) {
        (LossKind::AbsoluteDeviation, Target::Real(v)) => Ok((v - scalar(prediction)?).abs()),
        (LossKind::SquaredError, Target::Real(v)) => {
            let d = v - scalar(prediction)?;
            Ok(d * d)
        }
        (LossKind::CrossEntropy, Target::Class(c)) => cross_entropy(c, prediction),
        (LossKind::WeightedCrossEntropy(w), Target::Class(c)) => {
            let weight = *w.get(c).ok_or(Error::IndexOutOfRange { index: c, bound: w.len() })?;
            Ok(weight * cross_entropy(c, prediction)?)
        }
        (k, _) => Err(invalid(format!("loss '{}' does not match the target kind", k.name()))),
    }
}

fn scalar(prediction: &[f64]) -> Result<f64> {
    match prediction {
        [v] => Ok(*v),
        _ => Err(Error::DimensionMismatch { expected: 1, found: prediction.len() }),
    }
}

fn cross_entropy(class: usize, probs: &[f64]) -> Result<f64> {
    let p = *probs
        .get(class)
        .ok_or(Error::IndexOutOfRange { index: class, bound: probs.len() })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Per-row losses for a batch of predictions (one row per observation).
pub fn row_losses(kind: &LossKind, y: &TargetVector, predictions: ArrayView2<f64>) -> Result<Vec<f64>> {
    if predictions.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: predictions.nrows() });
    }
    predictions
        .outer_iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            Some(s) => loss(kind, y.get(i), s),
            None => loss(kind, y.get(i), &row.to_vec()),
        })
        .collect()
}
