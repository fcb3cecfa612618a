//! Leave-one-covariate-out comparator: refit without each feature and
//! sign-test the loss increase on the inference set.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{combine, full_losses};
use crate::error::{invalid, Result};
use crate::loss::LossKind;
use crate::model::{train, Mlp, TrainConfig};
use crate::par::{map_slice, ExecMode};
use crate::sign_test::{sign_test, CiPolicy, SignTestOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocoFeature {
    pub column: usize,
    pub name: String,
    pub outcome: Option<SignTestOutcome>,
    pub significant: bool,
    /// Diagnostic when the refit for this feature failed.
    pub error: Option<String>,
    pub wall_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocoReport {
    pub method: String,
    pub features: Vec<LocoFeature>,
    /// Models trained, the full model included.
    pub refit_count: usize,
    pub full_fit_secs: f64,
    pub total_wall_secs: f64,
    pub alpha: f64,
    pub loss: String,
}

impl LocoReport {
    pub fn significant_columns(&self) -> Vec<usize> {
        self.features.iter().filter(|f| f.significant).map(|f| f.column).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocoConfig {
    pub alpha: f64,
    pub loss: LossKind,
    pub ci_policy: CiPolicy,
    /// Columns to test; all features when `None`.
    pub features: Option<Vec<usize>>,
    pub exec: ExecMode,
}

impl Default for LocoConfig {
    fn default() -> Self {
        LocoConfig {
            alpha: 0.05,
            loss: LossKind::AbsoluteDeviation,
            ci_policy: CiPolicy::Auto,
            features: None,
            exec: ExecMode::Parallel,
        }
    }
}

pub struct LocoOutcome {
    pub report: LocoReport,
    pub full_model: Mlp,
}

/// Fits the full model and one reduced model per tested feature (same
/// hyperparameters and seed, column deleted). A failed refit is reported on
/// its feature and does not abort the others.
pub fn loco_test(
    train_set: &Dataset,
    validation: &Dataset,
    inference: &Dataset,
    train_cfg: &TrainConfig,
    cfg: &LocoConfig,
) -> Result<LocoOutcome> {
    let start = Instant::now();
    let p = train_set.x.feature_count();
    let columns = cfg.features.clone().unwrap_or_else(|| (1..=p).collect());
    if let Some(&bad) = columns.iter().find(|&&j| j == 0 || j > p) {
        return Err(invalid(format!("cannot leave out column {bad}")));
    }

    let full = train(train_cfg, train_set, validation)?.model;
    let full_fit_secs = start.elapsed().as_secs_f64();
    let full_losses_d2 = full_losses(&full, inference, &cfg.loss)?;

    let features = map_slice(cfg.exec, &columns, |&j| {
        let t0 = Instant::now();
        let name = train_set.x.schema().name(j).to_string();
        let run = || -> Result<SignTestOutcome> {
            let reduced = train(train_cfg, &train_set.without_column(j)?, &validation.without_column(j)?)?.model;
            let reduced_losses = full_losses(&reduced, &inference.without_column(j)?, &cfg.loss)?;
            let delta = combine(&reduced_losses, &full_losses_d2, 0.0);
            let outcome = sign_test(&delta, cfg.alpha, None)?;
            if outcome.significant() {
                sign_test(&delta, cfg.alpha, Some(cfg.ci_policy))
            } else {
                Ok(outcome)
            }
        };
        let (outcome, error) = match run() {
            Ok(o) => (Some(o), None),
            Err(e) => {
                log::warn!("LOCO refit without '{name}' failed: {e}");
                (None, Some(e.to_string()))
            }
        };
        LocoFeature {
            column: j,
            name,
            significant: outcome.as_ref().is_some_and(SignTestOutcome::significant),
            outcome,
            error,
            wall_secs: t0.elapsed().as_secs_f64(),
        }
    });

    Ok(LocoOutcome {
        report: LocoReport {
            method: "loco".into(),
            refit_count: features.len() + 1,
            features,
            full_fit_secs,
            total_wall_secs: start.elapsed().as_secs_f64(),
            alpha: cfg.alpha,
            loss: cfg.loss.name().into(),
        },
        full_model: full,
    })
}
