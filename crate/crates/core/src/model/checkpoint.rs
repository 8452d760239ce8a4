//! JSON parameter checkpoints: `{"version": 1, "params": {name: {shape, values}}}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, ModelParams};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    params: BTreeMap<String, Entry>,
}

pub fn to_json(params: &ModelParams) -> Result<String> {
    let params = params
        .entries()
        .into_iter()
        .map(|(name, _, t)| {
            (
                name,
                Entry {
                    shape: t.shape().to_vec(),
                    values: t.data().to_vec(),
                },
            )
        })
        .collect();
    Ok(serde_json::to_string(&Checkpoint {
        version: CHECKPOINT_VERSION,
        params,
    })?)
}

pub fn from_json(text: &str) -> Result<ModelParams> {
    let mut ckpt: Checkpoint = serde_json::from_str(text)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    let shape_of = |name: &str| {
        ckpt.params
            .get(name)
            .map(|e| e.shape.clone())
            .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
    };
    let emb = shape_of("encoder.embedding")?;
    let bias = shape_of("shared.bias")?;
    if emb.len() != 2 || bias.len() != 1 {
        return Err(Error::Format("malformed embedding or shared bias shape".into()));
    }
    let template = ModelParams::init(
        &ModelConfig {
            vocab_size: emb[0],
            embed_dim: emb[1],
            latent_dim: bias[0],
        },
        0,
    )?;
    let params = template.try_map_named(|name, t| match ckpt.params.remove(name) {
        Some(e) if e.shape == t.shape() => Tensor::new(e.shape, e.values),
        Some(e) => Err(Error::Format(format!(
            "{name}: shape {:?}, expected {:?}",
            e.shape,
            t.shape()
        ))),
        None => Err(Error::Format(format!("missing tensor {name}"))),
    })?;
    if let Some(extra) = ckpt.params.keys().next() {
        return Err(Error::Format(format!("unexpected tensor {extra}")));
    }
    Ok(params)
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, to_json(params)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelParams> {
    from_json(&fs::read_to_string(path)?)
}
