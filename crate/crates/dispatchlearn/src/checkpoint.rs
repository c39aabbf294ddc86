//! Versioned JSON checkpoints.

use std::path::Path;

use dispatchlearn_core::regret::Scenario;
use dispatchlearn_core::training::{Forecaster, ModelSet, TruthOracle};
use dispatchlearn_core::predictor::PredictorError;
use dispatchlearn_core::ContextSample;
use serde::{Deserialize, Serialize};

use crate::config::ResolvedConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot read checkpoint {path}: {message}")]
    Read { path: String, message: String },
    #[error("checkpoint format version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredForecaster {
    Trained { models: ModelSet, best_epoch: usize },
    /// Predicts the realized values of each sample.
    TruthOracle,
}

impl Forecaster for StoredForecaster {
    fn forecast(&self, sample: &ContextSample) -> Result<(Vec<f64>, Option<Vec<f64>>), PredictorError> {
        match self {
            StoredForecaster::Trained { models, .. } => models.predict(sample),
            StoredForecaster::TruthOracle => TruthOracle.forecast(sample),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub forecaster: StoredForecaster,
    pub config: ResolvedConfig,
    pub scenario: Scenario,
}

impl Checkpoint {
    pub fn new(forecaster: StoredForecaster, config: ResolvedConfig, scenario: Scenario) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            forecaster,
            config,
            scenario,
        }
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version { found: header.version });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|e| CheckpointError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}
