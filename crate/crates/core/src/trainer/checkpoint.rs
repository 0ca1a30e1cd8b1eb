//! Bit-exact checkpoint files.
//!
//! Layout: the magic bytes `MURL1\n`, a little-endian `u32` manifest length,
//! a UTF-8 JSON manifest, then every tensor as little-endian IEEE-754 `f32`
//! values, concatenated in manifest order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::OptimizerState;
use crate::corpus::Vocabulary;
use crate::error::CheckpointError;
use crate::model::{ModelDims, ModelParams, BLOCKS};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"MURL1\n";
const HEADER_LEN: usize = CHECKPOINT_MAGIC.len() + 4;

/// Everything needed to resume training or evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub optimizer: OptimizerState<f32>,
    pub vocab: Vocabulary,
    /// Flat run configuration echoed for provenance.
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn new(
        params: ModelParams<f32>,
        optimizer: OptimizerState<f32>,
        vocab: Vocabulary,
        config: BTreeMap<String, String>,
    ) -> Self {
        let config_hash = config_hash(&config);
        Self {
            params,
            optimizer,
            vocab,
            config,
            config_hash,
        }
    }
}

/// Hex SHA-256 of the sorted `key=value` lines.
pub fn config_hash(config: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in config {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    byte_offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    config: BTreeMap<String, String>,
    vocabulary: Vocabulary,
    dims: ModelDims,
    optimizer_step: u64,
    tensors: Vec<TensorEntry>,
}

const GROUPS: [&str; 3] = ["params", "adam_m", "adam_v"];

fn expected_tensors(dims: &ModelDims) -> Vec<(String, Vec<usize>)> {
    let shapes = ModelParams::<f32>::block_shapes(dims);
    GROUPS
        .iter()
        .flat_map(|g| {
            BLOCKS
                .iter()
                .zip(shapes.clone())
                .map(move |(info, shape)| (format!("{g}.{}", info.name), shape))
        })
        .collect()
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let dims = ckpt.params.dims();
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, shape) in expected_tensors(&dims) {
        let bytes = numel(&shape) * 4;
        tensors.push(TensorEntry {
            name,
            shape,
            byte_offset: offset,
        });
        offset += bytes;
    }
    let manifest = Manifest {
        config_hash: ckpt.config_hash.clone(),
        config: ckpt.config.clone(),
        vocabulary: ckpt.vocab.clone(),
        dims,
        optimizer_step: ckpt.optimizer.step,
        tensors,
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let manifest_len = u32::try_from(json.len()).map_err(|_| Error::invalid("checkpoint manifest exceeds 4 GiB"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + json.len() + offset);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&manifest_len.to_le_bytes());
    out.extend_from_slice(&json);
    for group in [&ckpt.params, &ckpt.optimizer.m, &ckpt.optimizer.v] {
        for block in group.blocks() {
            for x in block {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|source| Error::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}

fn decode(bytes: &[u8]) -> std::result::Result<Checkpoint, CheckpointError> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..CHECKPOINT_MAGIC.len()] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::ManifestLength {
            declared: 4,
            available: bytes.len() - CHECKPOINT_MAGIC.len(),
        });
    }
    let declared = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let available = bytes.len() - HEADER_LEN;
    if declared > available {
        return Err(CheckpointError::ManifestLength { declared, available });
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[HEADER_LEN..HEADER_LEN + declared])
        .map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let payload = &bytes[HEADER_LEN + declared..];

    let expected = expected_tensors(&manifest.dims);
    let mut offset = 0;
    for (name, shape) in &expected {
        let entry = manifest
            .tensors
            .iter()
            .find(|t| &t.name == name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        if &entry.shape != shape {
            return Err(CheckpointError::ShapeMismatch {
                name: name.clone(),
                expected: shape.clone(),
                found: entry.shape.clone(),
            });
        }
        if entry.byte_offset != offset {
            return Err(CheckpointError::BadOffset {
                name: name.clone(),
                offset: entry.byte_offset,
                expected: offset,
            });
        }
        offset += numel(shape) * 4;
    }
    if payload.len() != offset {
        return Err(CheckpointError::PayloadLength {
            expected: offset,
            found: payload.len(),
        });
    }

    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let mut fill = |target: &mut ModelParams<f32>| {
        for block in target.blocks_mut() {
            for x in block.iter_mut() {
                *x = values.next().expect("length checked");
            }
        }
    };
    let mut params = ModelParams::zeros(&manifest.dims);
    let mut m = ModelParams::zeros(&manifest.dims);
    let mut v = ModelParams::zeros(&manifest.dims);
    fill(&mut params);
    fill(&mut m);
    fill(&mut v);
    Ok(Checkpoint {
        params,
        optimizer: OptimizerState {
            m,
            v,
            step: manifest.optimizer_step,
        },
        vocab: manifest.vocabulary,
        config: manifest.config,
        config_hash: manifest.config_hash,
    })
}
