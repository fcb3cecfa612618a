//! Choosing β by running the first-order test on randomly parameterised
//! copies of the model.

use serde::{Deserialize, Serialize};

use super::delta::{combine, masked_losses};
use super::first_order::test_units;
use super::SfitConfig;
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::model::{Mlp, MlpConfig, PredictiveModel};
use crate::par::map_range;
use crate::seed::{derive_seed, STREAM_CALIBRATION};
use crate::sign_test::{fdr_adjust, sign_test};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub grid: Vec<f64>,
    /// Mean fraction of features declared significant across random models,
    /// one entry per grid value.
    pub false_discovery: Vec<f64>,
    pub chosen: f64,
    /// False when no grid value reached `alpha`; `chosen` is then the largest.
    pub qualified: bool,
    pub n_random_models: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

/// Baseline losses and per-unit losses of one random model.
type ModelLosses = (Vec<f64>, Vec<Vec<f64>>);

/// Scans `grid` in increasing order and returns the first β whose average
/// false-discovery fraction over `n_random_models` randomised copies of
/// `model` is at most `cfg.alpha`.
///
/// Random model `i` uses seed `derive_seed(seed, STREAM_CALIBRATION, i)` and is
/// shared by every grid value, so the curve is monotone in β.
pub fn calibrate_beta<M>(
    model: &M,
    validation: &Dataset,
    cfg: &SfitConfig,
    grid: &[f64],
    n_random_models: usize,
    seed: u64,
) -> Result<BetaCalibration>
where
    M: PredictiveModel + ?Sized,
{
    if grid.is_empty() {
        return Err(invalid("calibration grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("calibration grid must be strictly increasing"));
    }
    if n_random_models == 0 {
        return Err(invalid("need at least one random model"));
    }
    for &b in grid {
        cfg.with_beta(b).validate()?;
    }
    let units = test_units(validation.x.schema(), cfg.group_dummies, &cfg.baseline);
    if units.is_empty() {
        return Err(invalid("no features to test"));
    }

    let per_model: Vec<Result<ModelLosses>> = map_range(cfg.exec, n_random_models, |i| {
        let random = model.randomized(derive_seed(seed, STREAM_CALIBRATION, i as u64))?;
        let base = masked_losses(&*random, validation, &cfg.baseline, cfg.fill, &cfg.loss)?;
        let with = units
            .iter()
            .map(|u| {
                let mut active = cfg.baseline.clone();
                active.extend(&u.columns);
                masked_losses(&*random, validation, &active, cfg.fill, &cfg.loss)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((base, with))
    });
    let per_model = per_model.into_iter().collect::<Result<Vec<_>>>()?;

    let mut false_discovery = Vec::with_capacity(grid.len());
    let mut chosen = None;
    for &beta in grid {
        let mut total = 0.0;
        for (base, with) in &per_model {
            let p_values = with
                .iter()
                .map(|w| Ok(sign_test(&combine(base, w, beta), cfg.alpha, None)?.p_value))
                .collect::<Result<Vec<f64>>>()?;
            let rejected = fdr_adjust(&p_values, cfg.alpha, cfg.fdr)?.rejected.len();
            total += rejected as f64 / units.len() as f64;
        }
        let rate = total / per_model.len() as f64;
        log::info!("beta {beta:e}: mean false-discovery fraction {rate:.4}");
        false_discovery.push(rate);
        if rate <= cfg.alpha {
            chosen = Some(beta);
            break;
        }
    }
    let qualified = chosen.is_some();
    if !qualified {
        log::warn!("no grid value brought the random-model discovery rate under {}", cfg.alpha);
    }
    Ok(BetaCalibration {
        grid: grid.to_vec(),
        false_discovery,
        chosen: chosen.unwrap_or(*grid.last().expect("non-empty grid")),
        qualified,
        n_random_models,
        alpha: cfg.alpha,
        seed,
    })
}

/// Same as [`calibrate_beta`] with random networks built from `config`.
pub fn calibrate_beta_for_config(
    config: &MlpConfig,
    validation: &Dataset,
    cfg: &SfitConfig,
    grid: &[f64],
    n_random_models: usize,
    seed: u64,
) -> Result<BetaCalibration> {
    let template = Mlp::new(config.clone(), seed)?;
    calibrate_beta(&template, validation, cfg, grid, n_random_models, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-6, 1e-1, 6);
        assert_eq!(g.len(), 6);
        assert!((g[0] - 1e-6).abs() < 1e-20);
        assert!((g[5] - 1e-1).abs() < 1e-15);
        assert!((g[4] - 1e-2).abs() < 1e-15);
    }
}
