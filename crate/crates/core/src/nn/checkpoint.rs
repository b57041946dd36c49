//! Versioned JSON model checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

use super::matrix::Matrix;
use super::model::{Activation, MlpModel};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointDoc {
    format_version: u32,
    layer_dims: Vec<usize>,
    activation: Activation,
    dropout_rate: f64,
    /// Row-major `(dims[l], dims[l+1])` weights per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn to_checkpoint_json(&self) -> String {
        let doc = CheckpointDoc {
            format_version: CHECKPOINT_FORMAT_VERSION,
            layer_dims: self.layer_dims.clone(),
            activation: self.activation,
            dropout_rate: self.dropout_rate,
            weights: self.weights.iter().map(|w| w.data().to_vec()).collect(),
            biases: self.biases.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serialization cannot fail")
    }

    pub fn from_checkpoint_json(json: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(json)?;
        if doc.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(config_err!(
                "unsupported checkpoint format version {}",
                doc.format_version
            ));
        }
        if doc.layer_dims.len() != doc.weights.len() + 1 {
            return Err(config_err!("checkpoint layer_dims and weights disagree"));
        }
        let weights = doc
            .weights
            .into_iter()
            .zip(doc.layer_dims.windows(2))
            .map(|(w, d)| Matrix::from_vec(d[0], d[1], w))
            .collect::<Result<Vec<_>>>()?;
        MlpModel::from_parameters(weights, doc.biases, doc.activation, doc.dropout_rate)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_json())?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_json(&std::fs::read_to_string(path)?)
    }
}
