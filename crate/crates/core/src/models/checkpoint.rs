//! Checkpoint files.
//!
//! Layout (little-endian): `"SERMODL1"`, u32 version (1), u32 header length,
//! the JSON header (kind, input shape, class count, layers, pipeline config),
//! then every parameter tensor as raw f32 in layer order, weights before biases.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelError, ModelKind, ModelSpec};
use crate::features::PipelineConfig;
use crate::nn::{LayerSpec, Sequential, SplitMix64};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SERMODL1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: ModelKind,
    input_shape: (usize, usize),
    num_classes: usize,
    layers: Vec<LayerSpec>,
    pipeline: PipelineConfig,
}

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let header = Header {
        kind: model.spec.kind,
        input_shape: model.spec.input_shape,
        num_classes: model.spec.num_classes,
        layers: model.spec.layers.clone(),
        pipeline: model.pipeline.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header is always serializable");
    let mut out = Vec::with_capacity(16 + json.len() + 4 * model.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.net.params() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, ModelError> {
    let b = bytes.get(at..at + 4).ok_or(ModelError::TruncatedFile)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model, ModelError> {
    let magic = bytes.get(..8).ok_or(ModelError::TruncatedFile)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = read_u32(bytes, 8)?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::VersionMismatch(version));
    }
    let len = read_u32(bytes, 12)? as usize;
    let json = bytes.get(16..16 + len).ok_or(ModelError::TruncatedFile)?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| ModelError::ShapeMismatchOnLoad(format!("header: {e}")))?;

    let spec = ModelSpec::new(header.kind, header.input_shape, header.num_classes)
        .map_err(|e| ModelError::ShapeMismatchOnLoad(e.to_string()))?;
    if spec.layers != header.layers {
        return Err(ModelError::ShapeMismatchOnLoad(format!(
            "layer list does not match the {:?} architecture",
            header.kind
        )));
    }
    if header.pipeline.shape() != spec.input_shape {
        return Err(ModelError::ShapeMismatchOnLoad(format!(
            "pipeline shape {:?} differs from input shape {:?}",
            header.pipeline.shape(),
            spec.input_shape
        )));
    }
    let mut net = Sequential::<f32>::from_specs(&spec.nn_input_shape(), &spec.layers, &mut SplitMix64::new(0))
        .map_err(|e| ModelError::ShapeMismatchOnLoad(e.to_string()))?;

    let payload = &bytes[16 + len..];
    let expected = 4 * net.param_count();
    if payload.len() < expected {
        return Err(ModelError::TruncatedFile);
    }
    if payload.len() > expected {
        return Err(ModelError::ShapeMismatchOnLoad(format!(
            "{} payload bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut floats = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    for p in net.params_mut() {
        for (dst, src) in p.value.data_mut().iter_mut().zip(&mut floats) {
            *dst = src;
        }
    }
    Ok(Model {
        spec,
        net,
        pipeline: header.pipeline,
    })
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode_checkpoint(model)).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Model, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&bytes)
}
