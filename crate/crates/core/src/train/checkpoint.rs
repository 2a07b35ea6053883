use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::loss::LossWeights;
use crate::data::Vocabularies;
use crate::error::{Error, Result};
use crate::graph::ConversionRules;
use crate::nn::{Model, ModelConfig};

pub const CHECKPOINT_VERSION: u32 = 1;
const META_KEY: &str = "dkg";
const LOSS_WEIGHTS: &str = "loss.s";

/// Everything besides parameter values needed to rebuild a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub model: ModelConfig,
    pub vocab: Vocabularies,
    pub rules: ConversionRules,
    pub multi_mode: bool,
    pub seed: u64,
    pub step: usize,
}

pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: Model,
    pub weights: LossWeights,
}

/// Writes parameters, loss weights and metadata to one safetensors file.
pub fn save(path: &Path, model: &Model, weights: &LossWeights, meta: &CheckpointMeta) -> Result<()> {
    let mut tensors: Vec<(String, Tensor)> = model.params().tensors().into_iter().collect();
    tensors.push((LOSS_WEIGHTS.to_string(), weights.var().as_tensor().detach()));
    tensors.sort_by(|a, b| a.0.cmp(&b.0));
    let info = HashMap::from([(META_KEY.to_string(), serde_json::to_string(meta)?)]);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    safetensors::serialize_to_file(tensors, Some(info), path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path, device: &Device) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (_, header) = safetensors::SafeTensors::read_metadata(&buf)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let raw = header
        .metadata()
        .as_ref()
        .and_then(|m| m.get(META_KEY))
        .ok_or_else(|| Error::Checkpoint(format!("{}: missing metadata", path.display())))?;
    let meta: CheckpointMeta = serde_json::from_str(raw)?;
    if meta.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            meta.version
        )));
    }
    let mut tensors = candle_core::safetensors::load_buffer(&buf, device)?;
    let s = tensors
        .remove(LOSS_WEIGHTS)
        .ok_or_else(|| Error::Checkpoint("missing loss weights".into()))?;
    let dtype = s.dtype();
    let placeholder = vec![0.0; meta.vocab.words.len() * meta.model.word_dim];
    let model = Model::new(
        meta.model.clone(),
        meta.vocab.clone(),
        Some(placeholder),
        meta.seed,
        dtype,
        device,
    )?;
    model.params().assign_all(&tensors)?;
    let weights = LossWeights::from_values(&s.to_dtype(DType::F64)?.to_vec1()?, dtype, device)?;
    Ok(Checkpoint { meta, model, weights })
}
