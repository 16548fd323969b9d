//! Versioned checkpoint container for trained models.
//!
//! One JSON file format holds either the stage-chain model (topology plus
//! weight tensors in declared order) or a set of per-stage linear baselines,
//! distinguished by a model-kind tag.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::LinearModel;
use crate::error::{Error, Result};
use crate::model::ParameterSet;

pub const CHECKPOINT_FORMAT: &str = "dmmtl.checkpoint.v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    /// The stage-chain model.
    Dmmtl {
        params: ParameterSet,
        /// Total epochs trained so far (for resuming).
        epochs_trained: usize,
    },
    /// Per-stage linear baselines, tagged by method name
    /// (`ridge`, `elastic_net`, `multi_task_elastic_net`).
    Linear { method: String, per_stage: Vec<LinearModel> },
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    format: String,
    #[serde(flatten)]
    model: SavedModel,
}

pub fn save_checkpoint(path: &Path, model: &SavedModel) -> Result<()> {
    let envelope = Envelope { format: CHECKPOINT_FORMAT.to_string(), model: model.clone() };
    let json = serde_json::to_string(&envelope)
        .map_err(|e| Error::Data(format!("cannot serialize checkpoint: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SavedModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let envelope: Envelope = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("bad checkpoint {}: {e}", path.display())))?;
    if envelope.format != CHECKPOINT_FORMAT {
        return Err(Error::Data(format!(
            "unsupported checkpoint format '{}' (expected {CHECKPOINT_FORMAT})",
            envelope.format
        )));
    }
    if let SavedModel::Dmmtl { params, .. } = &envelope.model {
        params.topology().validate()?;
        if !params.all_finite() {
            return Err(Error::Data("checkpoint parameters contain non-finite values".into()));
        }
    }
    Ok(envelope.model)
}
