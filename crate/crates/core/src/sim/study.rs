//! Repeated-trial power and comparison studies.
//!
//! Each trial draws fresh training, validation and inference sets, fits a
//! fresh network, then evaluates every `(α, β₁, β₂, n₂)` cell on that model.
//! Trial `t` takes its seeds from `derive_seed(root, stream, t)`, so any trial
//! can be replayed alone and the aggregate does not depend on run order.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dgp::DgpSpec;
use crate::data::Dataset;
use crate::engine::{
    interaction_matrix, screen_interactions, sfit_first_order, sfit_second_order, SfitConfig,
    SfitFirstOrderReport, SfitSecondOrderReport,
};
use crate::error::{invalid, Result};
use crate::loco::{loco_test, LocoConfig};
use crate::loss::LossKind;
use crate::model::{train, Mlp, PredictiveModel, TrainConfig};
use crate::par::{map_range, ExecMode};
use crate::seed::{derive_seed, STREAM_DATA, STREAM_INFERENCE, STREAM_TRAIN, STREAM_VALIDATION};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub n2: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub dgp: DgpSpec,
    pub n_train: usize,
    pub n_validation: usize,
    /// Size of the inference set drawn per trial; cells use its first `n2` rows.
    pub n_inference: usize,
    pub train: TrainConfig,
    pub cells: Vec<CellConfig>,
    pub loss: LossKind,
    pub second_order: bool,
    /// Partner-list length for weight screening.
    pub screen_l: usize,
    pub n_trials: usize,
    pub exec: ExecMode,
}

impl StudyConfig {
    /// Network and optimiser settings of the seven-feature experiment.
    pub fn main(n_train: usize, n_trials: usize) -> Self {
        StudyConfig {
            dgp: DgpSpec::main(),
            n_train,
            n_validation: (n_train / 5).max(1),
            n_inference: 10_000,
            train: TrainConfig::regression(vec![150, 50], 0),
            cells: vec![CellConfig { alpha: 0.05, beta1: 1e-2, beta2: 1e-3, n2: 10_000 }],
            loss: LossKind::AbsoluteDeviation,
            second_order: true,
            screen_l: 10,
            n_trials,
            exec: ExecMode::Parallel,
        }
    }

    /// Full cartesian grid of cells.
    pub fn grid(alphas: &[f64], betas: &[(f64, f64)], n2s: &[usize]) -> Vec<CellConfig> {
        let mut cells = Vec::new();
        for &alpha in alphas {
            for &(beta1, beta2) in betas {
                for &n2 in n2s {
                    cells.push(CellConfig { alpha, beta1, beta2, n2 });
                }
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(invalid("need at least one trial"));
        }
        if self.cells.is_empty() {
            return Err(invalid("study has no cells"));
        }
        if let Some(c) = self.cells.iter().find(|c| c.n2 == 0 || c.n2 > self.n_inference) {
            return Err(invalid(format!("cell n2 = {} outside 1..={}", c.n2, self.n_inference)));
        }
        self.dgp.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: CellConfig,
    pub first: SfitFirstOrderReport,
    pub second: Option<SfitSecondOrderReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub epochs: usize,
    pub best_validation_loss: f64,
    /// For each feature row of `|W|ᵀ|W|`, the column of its largest
    /// off-diagonal feature entry (index 0 unused).
    pub screen_argmax: Vec<usize>,
    pub train_secs: f64,
    pub sfit_first_order_secs: f64,
    pub cells: Vec<CellRecord>,
}

/// Selection frequencies for one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub cell: CellConfig,
    pub trials: usize,
    /// `(feature name, fraction of trials first-order significant)`.
    pub first_order: Vec<(String, f64)>,
    pub second_order: Vec<(String, f64)>,
    /// Unordered significant pairs and their frequencies.
    pub pairs: BTreeMap<String, f64>,
    pub gate_passed: f64,
    pub next_gate_passed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerStudy {
    pub tables: Vec<FrequencyTable>,
    pub trials: Vec<TrialRecord>,
    pub failed_trials: Vec<(usize, String)>,
    pub seed: u64,
}

/// Column of the largest off-diagonal feature entry in each row of `|W|ᵀ|W|`.
fn screen_argmax(weights: ndarray::ArrayView2<f64>) -> Vec<usize> {
    let g = interaction_matrix(weights);
    let p = g.nrows() - 1;
    (0..=p)
        .map(|j| {
            if j == 0 {
                return 0;
            }
            (1..=p).filter(|&k| k != j).fold(0, |best, k| if best == 0 || g[[j, k]] > g[[j, best]] { k } else { best })
        })
        .collect()
}

fn draw(cfg: &StudyConfig, root: u64, trial: usize) -> Result<(Dataset, Dataset, Dataset)> {
    let t = trial as u64;
    Ok((
        cfg.dgp.generate(cfg.n_train, derive_seed(root, STREAM_DATA, t))?,
        cfg.dgp.generate(cfg.n_validation, derive_seed(root, STREAM_VALIDATION, t))?,
        cfg.dgp.generate(cfg.n_inference, derive_seed(root, STREAM_INFERENCE, t))?,
    ))
}

fn run_trial(cfg: &StudyConfig, root: u64, trial: usize) -> Result<TrialRecord> {
    let (d1, dv, d2_full) = draw(cfg, root, trial)?;
    let mut tcfg = cfg.train.clone();
    tcfg.seed = derive_seed(root, STREAM_TRAIN, trial as u64);
    let t0 = Instant::now();
    let trained = train(&tcfg, &d1, &dv)?;
    let train_secs = t0.elapsed().as_secs_f64();
    let model: &Mlp = &trained.model;
    let weights = model.first_layer_weights().expect("networks expose first-layer weights");
    let candidates = screen_interactions(weights, cfg.screen_l.min(cfg.dgp.p - 1).max(1))?;

    let mut cells = Vec::with_capacity(cfg.cells.len());
    let mut sfit_first_order_secs = 0.0;
    for cell in &cfg.cells {
        let d2 = d2_full.head(cell.n2)?;
        let base = SfitConfig { alpha: cell.alpha, beta: cell.beta1, loss: cfg.loss.clone(), exec: ExecMode::Sequential, ..SfitConfig::default() };
        let t1 = Instant::now();
        let first = sfit_first_order(model, &d2, &base)?;
        sfit_first_order_secs += t1.elapsed().as_secs_f64();
        let second = if cfg.second_order {
            Some(sfit_second_order(model, &d2, &base.with_beta(cell.beta2), &first.significant, &candidates, false)?)
        } else {
            None
        };
        cells.push(CellRecord { cell: *cell, first, second });
    }
    Ok(TrialRecord {
        trial,
        epochs: trained.history.epochs.len(),
        best_validation_loss: trained.history.best_validation_loss,
        screen_argmax: screen_argmax(weights),
        train_secs,
        sfit_first_order_secs: sfit_first_order_secs / cfg.cells.len() as f64,
        cells,
    })
}

/// Runs `n_trials` independent train-and-test trials and aggregates
/// selection frequencies per cell. Failed trials are skipped and listed.
pub fn run_power_study(cfg: &StudyConfig, seed: u64) -> Result<PowerStudy> {
    cfg.validate()?;
    let results = map_range(cfg.exec, cfg.n_trials, |t| run_trial(cfg, seed, t));
    let mut trials = Vec::new();
    let mut failed_trials = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => trials.push(rec),
            Err(e) => {
                log::warn!("trial {t} failed: {e}");
                failed_trials.push((t, e.to_string()));
            }
        }
    }
    let names: Vec<String> = (1..=cfg.dgp.p).map(|j| format!("X{j}")).collect();
    let tables = (0..cfg.cells.len()).map(|c| aggregate(&cfg.cells[c], c, &trials, &names)).collect();
    Ok(PowerStudy { tables, trials, failed_trials, seed })
}

fn aggregate(cell: &CellConfig, index: usize, trials: &[TrialRecord], names: &[String]) -> FrequencyTable {
    let n = trials.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let mut first = vec![0usize; names.len()];
    let mut second = vec![0usize; names.len()];
    let mut pairs: BTreeMap<String, usize> = BTreeMap::new();
    let (mut gate, mut next_gate) = (0, 0);
    for t in trials {
        let rec = &t.cells[index];
        for &j in &rec.first.significant {
            first[j - 1] += 1;
        }
        if let Some(s) = &rec.second {
            for &j in &s.significant {
                second[j - 1] += 1;
            }
            for (a, b) in s.unordered_pairs() {
                *pairs.entry(format!("X{a}:X{b}")).or_default() += 1;
            }
            gate += usize::from(s.gate.passed);
            next_gate += usize::from(s.next_gate.as_ref().is_some_and(|g| g.passed));
        }
    }
    FrequencyTable {
        cell: *cell,
        trials: n,
        first_order: names.iter().cloned().zip(first.into_iter().map(frac)).collect(),
        second_order: names.iter().cloned().zip(second.into_iter().map(frac)).collect(),
        pairs: pairs.into_iter().map(|(k, v)| (k, frac(v))).collect(),
        gate_passed: frac(gate),
        next_gate_passed: frac(next_gate),
    }
}

impl PowerStudy {
    /// One row per (item, cell): `kind,item,alpha,beta1,beta2,n2,frequency,trials`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "item", "alpha", "beta1", "beta2", "n2", "frequency", "trials"])?;
        for t in &self.tables {
            let c = t.cell;
            let mut row = |kind: &str, item: &str, f: f64| {
                w.write_record([
                    kind.to_string(),
                    item.to_string(),
                    c.alpha.to_string(),
                    c.beta1.to_string(),
                    c.beta2.to_string(),
                    c.n2.to_string(),
                    f.to_string(),
                    t.trials.to_string(),
                ])
            };
            for (name, f) in &t.first_order {
                row("first-order", name, *f)?;
            }
            for (name, f) in &t.second_order {
                row("second-order", name, *f)?;
            }
            for (name, f) in &t.pairs {
                row("pair", name, *f)?;
            }
            row("gate", "second-order", t.gate_passed)?;
            row("gate", "third-order", t.next_gate_passed)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub dgp: DgpSpec,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_inference: usize,
    pub train: TrainConfig,
    pub alpha: f64,
    pub beta: f64,
    pub loss: LossKind,
    pub n_trials: usize,
    pub exec: ExecMode,
}

impl ComparisonConfig {
    /// Correlated two-feature regression with 1000 training and 1000
    /// inference rows, fitted by a linear model (no hidden layer).
    pub fn correlated_toy(n_trials: usize) -> Self {
        let mut train = TrainConfig::regression(Vec::new(), 0);
        train.adam.step_size = 1e-2;
        train.adam.early_stopping = Some(crate::model::EarlyStopping { patience: 5, min_delta: 1e-3 });
        ComparisonConfig {
            dgp: DgpSpec::correlated_toy(),
            n_train: 1000,
            n_validation: 250,
            n_inference: 1000,
            train,
            alpha: 0.05,
            beta: 1e-2,
            loss: LossKind::AbsoluteDeviation,
            n_trials,
            exec: ExecMode::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub names: Vec<String>,
    pub sfit_rates: Vec<f64>,
    pub loco_rates: Vec<f64>,
    /// Fraction of trials where SFIT selected every feature.
    pub sfit_all_selected: f64,
    pub sfit_secs: f64,
    pub loco_secs: f64,
    pub trials: usize,
    pub failed_trials: usize,
    pub seed: u64,
}

impl ComparisonTable {
    pub fn timing_ratio(&self) -> f64 {
        self.loco_secs / self.sfit_secs
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "sfit_rate", "loco_rate", "trials"])?;
        for (i, name) in self.names.iter().enumerate() {
            w.write_record([
                name.clone(),
                self.sfit_rates[i].to_string(),
                self.loco_rates[i].to_string(),
                self.trials.to_string(),
            ])?;
        }
        w.write_record(["timing_ratio".to_string(), self.sfit_secs.to_string(), self.loco_secs.to_string(), self.timing_ratio().to_string()])?;
        w.flush()?;
        Ok(())
    }
}

struct ComparisonTrial {
    sfit: BTreeSet<usize>,
    loco: Vec<usize>,
    sfit_secs: f64,
    loco_secs: f64,
}

/// SFIT and LOCO on identical data per trial. SFIT tests the full model LOCO
/// fitted, so its time is the test alone.
pub fn run_loco_comparison(cfg: &ComparisonConfig, seed: u64) -> Result<ComparisonTable> {
    cfg.dgp.validate()?;
    if cfg.n_trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let p = cfg.dgp.p;
    let results = map_range(cfg.exec, cfg.n_trials, |t| -> Result<ComparisonTrial> {
        let ti = t as u64;
        let d1 = cfg.dgp.generate(cfg.n_train, derive_seed(seed, STREAM_DATA, ti))?;
        let dv = cfg.dgp.generate(cfg.n_validation, derive_seed(seed, STREAM_VALIDATION, ti))?;
        let d2 = cfg.dgp.generate(cfg.n_inference, derive_seed(seed, STREAM_INFERENCE, ti))?;
        let mut tcfg = cfg.train.clone();
        tcfg.seed = derive_seed(seed, STREAM_TRAIN, ti);
        let lcfg = LocoConfig { alpha: cfg.alpha, loss: cfg.loss.clone(), exec: ExecMode::Sequential, ..LocoConfig::default() };
        let loco = loco_test(&d1, &dv, &d2, &tcfg, &lcfg)?;
        let scfg = SfitConfig { alpha: cfg.alpha, beta: cfg.beta, loss: cfg.loss.clone(), exec: ExecMode::Sequential, ..SfitConfig::default() };
        let t0 = Instant::now();
        let sfit = sfit_first_order(&loco.full_model, &d2, &scfg)?;
        Ok(ComparisonTrial {
            sfit: sfit.significant,
            loco: loco.report.significant_columns(),
            sfit_secs: t0.elapsed().as_secs_f64(),
            loco_secs: loco.report.total_wall_secs,
        })
    });
    let mut ok = Vec::new();
    let mut failed = 0;
    for r in results {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => {
                log::warn!("comparison trial failed: {e}");
                failed += 1;
            }
        }
    }
    let n = ok.len().max(1) as f64;
    let rate = |f: &dyn Fn(&ComparisonTrial, usize) -> bool, j: usize| ok.iter().filter(|t| f(t, j)).count() as f64 / n;
    Ok(ComparisonTable {
        names: (1..=p).map(|j| format!("X{j}")).collect(),
        sfit_rates: (1..=p).map(|j| rate(&|t, j| t.sfit.contains(&j), j)).collect(),
        loco_rates: (1..=p).map(|j| rate(&|t, j| t.loco.contains(&j), j)).collect(),
        sfit_all_selected: ok.iter().filter(|t| t.sfit.len() == p).count() as f64 / n,
        sfit_secs: ok.iter().map(|t| t.sfit_secs).sum(),
        loco_secs: ok.iter().map(|t| t.loco_secs).sum(),
        trials: ok.len(),
        failed_trials: failed,
        seed,
    })
}
