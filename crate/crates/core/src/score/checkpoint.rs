//! Binary checkpoint files: magic, version, length-prefixed JSON header and
//! a little-endian f32 payload of parameters and AdamW moments.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{Architecture, Linear, ScoreModel};
use super::train::{AdamState, Checkpoint, TrainMetadata};
use super::ScoreError;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SDROPCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    arch: Architecture,
    tensors: Vec<TensorInfo>,
    metadata: TrainMetadata,
    adam_step: u64,
}

fn tensor_infos(arch: &Architecture) -> Vec<TensorInfo> {
    let e = arch.encoder_layers();
    let mut out = Vec::new();
    for (i, (fan_in, fan_out)) in arch.layer_shapes().into_iter().enumerate() {
        let name = if i < e { format!("encoder.{i}") } else { format!("denoiser.{}", i - e) };
        out.push(TensorInfo { name: format!("{name}.weight"), shape: vec![fan_in, fan_out] });
        out.push(TensorInfo { name: format!("{name}.bias"), shape: vec![fan_out] });
    }
    out
}

fn push_model(buf: &mut Vec<u8>, model: &ScoreModel<f32>) {
    for layer in &model.layers {
        for v in layer.w.iter().chain(layer.b.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>, ScoreError> {
    let header = Header {
        arch: ckpt.model.arch.clone(),
        tensors: tensor_infos(&ckpt.model.arch),
        metadata: ckpt.metadata.clone(),
        adam_step: ckpt.adam.step,
    };
    let json = serde_json::to_vec(&header).map_err(|e| ScoreError::CorruptPayload(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + json.len() + 12 * ckpt.model.num_params());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    push_model(&mut buf, &ckpt.model);
    push_model(&mut buf, &ckpt.adam.m);
    push_model(&mut buf, &ckpt.adam.v);
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ScoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ScoreError::CorruptPayload(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ScoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn model(&mut self, arch: &Architecture) -> Result<ScoreModel<f32>, ScoreError> {
        let mut layers = Vec::new();
        for (fan_in, fan_out) in arch.layer_shapes() {
            let w = self.floats(fan_in * fan_out)?;
            let b = self.floats(fan_out)?;
            layers.push(Linear {
                w: Array2::from_shape_vec((fan_in, fan_out), w).expect("length checked"),
                b: Array1::from_vec(b),
            });
        }
        Ok(ScoreModel { arch: arch.clone(), layers })
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f32>, ScoreError> {
        let raw = self.take(4 * n)?;
        let out: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes"))).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ScoreError::CorruptPayload("non-finite parameter".into()));
        }
        Ok(out)
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint, ScoreError> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || bytes[..CHECKPOINT_MAGIC.len()] != CHECKPOINT_MAGIC {
        return Err(ScoreError::VersionMismatch("not a stabledrop checkpoint (bad magic)".into()));
    }
    let mut r = Reader { bytes, pos: CHECKPOINT_MAGIC.len() };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(ScoreError::VersionMismatch(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| ScoreError::CorruptPayload(format!("header: {e}")))?;
    let expected = tensor_infos(&header.arch);
    let shapes_match = expected.len() == header.tensors.len()
        && expected.iter().zip(&header.tensors).all(|(a, b)| a.name == b.name && a.shape == b.shape);
    if !shapes_match {
        return Err(ScoreError::CorruptPayload("tensor table does not match the architecture".into()));
    }
    let model = r.model(&header.arch)?;
    let m = r.model(&header.arch)?;
    let v = r.model(&header.arch)?;
    if r.pos != bytes.len() {
        return Err(ScoreError::CorruptPayload(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { model, adam: AdamState { step: header.adam_step, m, v }, metadata: header.metadata })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), ScoreError> {
    fs::write(path, checkpoint_to_bytes(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ScoreError> {
    checkpoint_from_bytes(&fs::read(path)?)
}
