//! Run configuration: a TOML file, then command-line overrides on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sfit::loss::LossKind;
use sfit::model::{AdamConfig, EarlyStopping, TrainConfig};
use sfit::sign_test::{CiPolicy, FdrMethod};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Csv,
    MainDgp,
    CorrelatedToy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: Source,
    pub path: Option<PathBuf>,
    pub target: String,
    pub categorical: Vec<String>,
    pub drop: Vec<String>,
    pub delimiter: char,
    pub classification: bool,
    /// Defaults to true for CSV input and false for simulated sources.
    pub standardize: Option<bool>,
    /// Rows to draw from a simulated source.
    pub rows: usize,
    /// Train, validation and inference fractions.
    pub split: [f64; 3],
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: Source::MainDgp,
            path: None,
            target: "y".into(),
            categorical: Vec::new(),
            drop: Vec::new(),
            delimiter: ',',
            classification: false,
            standardize: None,
            rows: 20_000,
            split: [0.7, 0.2, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    /// Training loss; `squared-error` for regression, `cross-entropy` for classes.
    pub loss: Option<String>,
    pub class_weighting: bool,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Zero disables early stopping.
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let stop = adam.early_stopping.unwrap_or(EarlyStopping { patience: 0, min_delta: 0.0 });
        ModelSection {
            hidden: vec![150, 50],
            loss: None,
            class_weighting: false,
            step_size: adam.step_size,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            batch_size: adam.batch_size,
            max_epochs: adam.max_epochs,
            patience: stop.patience,
            min_delta: stop.min_delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSection {
    pub alpha: f64,
    /// First-order β. Unset means: the calibrated value if one exists, else 1e-2.
    pub beta: Option<f64>,
    pub beta2: f64,
    /// Loss used for the differences.
    pub loss: Option<String>,
    pub fdr: String,
    pub ci: CiPolicy,
    pub ci_for_all: bool,
    pub order: u8,
    pub screen_l: usize,
    pub exhaustive: bool,
    /// `class`, or the name of a categorical group.
    pub partition: Option<String>,
    pub numeric_fill: f64,
    pub categorical_fill: f64,
    pub group_dummies: bool,
}

impl Default for TestSection {
    fn default() -> Self {
        TestSection {
            alpha: 0.05,
            beta: None,
            beta2: 1e-3,
            loss: None,
            fdr: "none".into(),
            ci: CiPolicy::Auto,
            ci_for_all: false,
            order: 1,
            screen_l: 10,
            exhaustive: false,
            partition: None,
            numeric_fill: 0.0,
            categorical_fill: sfit::data::DEFAULT_CATEGORICAL_FILL,
            group_dummies: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    /// Explicit grid; overrides the log-spaced one below.
    pub grid: Option<Vec<f64>>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_count: usize,
    pub random_models: usize,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection { grid: None, grid_lo: 1e-6, grid_hi: 1e-1, grid_count: 6, random_models: 20 }
    }
}

impl CalibrateSection {
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(|| sfit::engine::log_grid(self.grid_lo, self.grid_hi, self.grid_count))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocoSection {
    /// Feature names to leave out; all when empty.
    pub features: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Power,
    LocoComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub study: Study,
    pub trials: usize,
    /// Study default when unset: 20000 for `power`, 1000 for `loco-comparison`.
    pub n_train: Option<usize>,
    pub n_validation: Option<usize>,
    /// Study default when unset: 10000 for `power`, 1000 for `loco-comparison`.
    pub n_inference: Option<usize>,
    pub alphas: Vec<f64>,
    /// `(β₁, β₂)` pairs.
    pub betas: Vec<[f64; 2]>,
    pub n2s: Vec<usize>,
    pub second_order: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            study: Study::Power,
            trials: 30,
            n_train: None,
            n_validation: None,
            n_inference: None,
            alphas: vec![0.05],
            betas: vec![[1e-2, 1e-3]],
            n2s: vec![10_000],
            second_order: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub model: ModelSection,
    pub test: TestSection,
    pub calibrate: CalibrateSection,
    pub loco: LocoSection,
    pub simulate: SimulateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            data: DataSection::default(),
            model: ModelSection::default(),
            test: TestSection::default(),
            calibrate: CalibrateSection::default(),
            loco: LocoSection::default(),
            simulate: SimulateSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: String| Err(CliError::Config(format!("{field}: {why}")));
        if self.data.source == Source::Csv && self.data.path.is_none() {
            return bad("data.path", "required for csv input".into());
        }
        let s: f64 = self.data.split.iter().sum();
        if self.data.split.iter().any(|&f| f <= 0.0) || (s - 1.0).abs() > 1e-9 {
            return bad("data.split", format!("{:?} must be three positive fractions summing to 1", self.data.split));
        }
        if !(self.test.alpha > 0.0 && self.test.alpha <= 1.0) {
            return bad("test.alpha", format!("{} outside (0, 1]", self.test.alpha));
        }
        if let Some(b) = self.test.beta {
            if !(0.0..1.0).contains(&b) {
                return bad("test.beta", format!("{b} outside [0, 1)"));
            }
        }
        if !(0.0..1.0).contains(&self.test.beta2) {
            return bad("test.beta2", format!("{} outside [0, 1)", self.test.beta2));
        }
        if !matches!(self.test.order, 1 | 2) {
            return bad("test.order", format!("{} is not 1 or 2", self.test.order));
        }
        if self.test.screen_l == 0 {
            return bad("test.screen_l", "must be at least 1".into());
        }
        FdrMethod::from_name(&self.test.fdr).map_err(|e| CliError::Config(format!("test.fdr: {e}")))?;
        for (field, name) in [("model.loss", &self.model.loss), ("test.loss", &self.test.loss)] {
            if let Some(n) = name {
                LossKind::from_name(n).map_err(|e| CliError::Config(format!("{field}: {e}")))?;
            }
        }
        if self.model.hidden.contains(&0) {
            return bad("model.hidden", "layer widths must be positive".into());
        }
        self.adam().validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        if self.calibrate.random_models == 0 {
            return bad("calibrate.random_models", "must be at least 1".into());
        }
        let grid = self.calibrate.grid();
        if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("calibrate.grid", "must be non-empty and strictly increasing".into());
        }
        if self.simulate.trials == 0 {
            return bad("simulate.trials", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        let m = &self.model;
        AdamConfig {
            step_size: m.step_size,
            beta1: m.beta1,
            beta2: m.beta2,
            epsilon: m.epsilon,
            batch_size: m.batch_size,
            max_epochs: m.max_epochs,
            early_stopping: (m.patience > 0).then_some(EarlyStopping { patience: m.patience, min_delta: m.min_delta }),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let loss = match &self.model.loss {
            Some(n) => LossKind::from_name(n).expect("validated"),
            None if self.data.classification => LossKind::CrossEntropy,
            None => LossKind::SquaredError,
        };
        TrainConfig {
            hidden: self.model.hidden.clone(),
            seed,
            adam: self.adam(),
            loss,
            class_weighting: self.model.class_weighting,
        }
    }

    /// Loss for the differences: absolute deviation for regression,
    /// cross-entropy for classification, unless set.
    pub fn delta_loss(&self, classification: bool) -> LossKind {
        match &self.test.loss {
            Some(n) => LossKind::from_name(n).expect("validated"),
            None if classification => LossKind::CrossEntropy,
            None => LossKind::AbsoluteDeviation,
        }
    }

    pub fn standardize(&self) -> bool {
        self.data.standardize.unwrap_or(self.data.source == Source::Csv)
    }
}
