//! Trained-model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sfit::model::{Mlp, TrainConfig};

use crate::data::DataProvenance;
use crate::CliError;

pub const FORMAT: &str = "sfit-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: Mlp,
    pub train: TrainConfig,
    pub data: DataProvenance,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
}

impl Checkpoint {
    pub fn new(model: Mlp, train: TrainConfig, data: DataProvenance, best_epoch: usize, best_validation_loss: f64) -> Self {
        Checkpoint { format: FORMAT.into(), version: VERSION, model, train, data, best_epoch, best_validation_loss }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        crate::report::write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("checkpoint {} is malformed: {e}", path.display())))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(CliError::Runtime(format!(
                "checkpoint {} has format {} v{}, expected {FORMAT} v{VERSION}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        Ok(ck)
    }
}
