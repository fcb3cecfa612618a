//! Single feature introduction tests.
//!
//! A feature is judged by how much the model's loss drops when it alone is
//! introduced on top of an intercept-only masked input, with the baseline
//! loss shrunk by `(1 - β)`. Per-row differences are sign-tested.

mod calibrate;
mod delta;
mod first_order;
mod higher_order;
mod screen;

pub use calibrate::{calibrate_beta, calibrate_beta_for_config, log_grid, BetaCalibration};
pub use delta::{combine, delta_first_order, delta_pair, full_losses, masked_losses, DeltaSeries, DeltaTarget};
pub use first_order::{sfit_first_order, sfit_partitioned, test_units, FeatureResult, SfitFirstOrderReport, TestUnit};
pub use higher_order::{global_higher_order_check, sfit_second_order, GateOutcome, PairResult, SfitSecondOrderReport};
pub use screen::{interaction_matrix, screen_interactions, CandidatePairs, CandidateSource};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::MaskFill;
use crate::error::{invalid, Result};
use crate::loss::LossKind;
use crate::par::ExecMode;
use crate::sign_test::{CiPolicy, FdrMethod};

/// Settings shared by the first- and second-order procedures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfitConfig {
    pub alpha: f64,
    pub beta: f64,
    pub loss: LossKind,
    /// FDR control across the per-feature tests of one first-order run.
    pub fdr: FdrMethod,
    pub ci_policy: CiPolicy,
    /// Attach intervals to every item, not only significant ones.
    pub ci_for_all: bool,
    pub fill: MaskFill,
    /// Test each one-hot group as a single unit instead of per dummy.
    pub group_dummies: bool,
    /// Extra columns kept in the baseline (the intercept is always in it).
    pub baseline: BTreeSet<usize>,
    pub exec: ExecMode,
}

impl Default for SfitConfig {
    fn default() -> Self {
        SfitConfig {
            alpha: 0.05,
            beta: 1e-2,
            loss: LossKind::AbsoluteDeviation,
            fdr: FdrMethod::None,
            ci_policy: CiPolicy::Auto,
            ci_for_all: false,
            fill: MaskFill::default(),
            group_dummies: false,
            baseline: BTreeSet::new(),
            exec: ExecMode::Parallel,
        }
    }
}

impl SfitConfig {
    pub fn with_beta(&self, beta: f64) -> Self {
        SfitConfig { beta, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        delta::check_beta(self.beta)?;
        self.loss.validate()?;
        if self.baseline.contains(&0) {
            return Err(invalid("the intercept is implicit in the baseline"));
        }
        Ok(())
    }
}

/// Recommended minimum inference-set size; smaller sets trigger a warning.
pub const MIN_RECOMMENDED_N2: usize = 30;
