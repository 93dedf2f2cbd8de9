//! Model file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! bytes 0..4   magic "AEYE"
//! bytes 4..8   format version (u32), currently 1
//! bytes 8..12  header length in bytes (u32)
//! header       UTF-8 JSON: input_size, seed, layer specs, and per-layer
//!              weight/bias byte offsets relative to the blob start
//! blob         raw f32 weights in layer order: conv as
//!              (out_ch, in_ch, ky, kx) row-major, dense as (out, in)
//!              row-major, each followed by its bias vector
//! ```
//!
//! Weights survive a save/load round trip bit-exactly: they are copied
//! byte-for-byte with no re-encoding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::Layer;
use super::{CnnModel, LayerSpec, NnError};

pub const MODEL_MAGIC: [u8; 4] = *b"AEYE";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct BlobEntry {
    layer: usize,
    weights_offset: u64,
    /// f32 count, not bytes.
    weights_len: u64,
    bias_offset: u64,
    bias_len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    input_size: u32,
    seed: u64,
    layers: Vec<LayerSpec>,
    blobs: Vec<BlobEntry>,
}

fn push_f32s(blob: &mut Vec<u8>, values: &[f32]) {
    blob.reserve(values.len() * 4);
    for v in values {
        blob.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize a model to `path` in the format above.
pub fn save_model(model: &CnnModel<f32>, path: impl AsRef<Path>) -> Result<(), NnError> {
    let mut blobs = Vec::new();
    let mut blob = Vec::new();
    for (idx, layer) in model.layers().iter().enumerate() {
        let (w, b) = match layer {
            Layer::Conv(c) => (&c.weights, &c.bias),
            Layer::Dense(d) => (&d.weights, &d.bias),
            _ => continue,
        };
        let weights_offset = blob.len() as u64;
        push_f32s(&mut blob, w);
        let bias_offset = blob.len() as u64;
        push_f32s(&mut blob, b);
        blobs.push(BlobEntry {
            layer: idx,
            weights_offset,
            weights_len: w.len() as u64,
            bias_offset,
            bias_len: b.len() as u64,
        });
    }
    let header = Header {
        input_size: model.input_size(),
        seed: model.seed(),
        layers: model.layer_specs().to_vec(),
        blobs,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::with_capacity(12 + header_json.len() + blob.len());
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(&blob);
    std::fs::write(path, out)?;
    Ok(())
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Deserialize a model written by [`save_model`], validating magic,
/// version, layer-stack consistency, and blob geometry.
pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel<f32>, NnError> {
    let bytes = std::fs::read(path.as_ref())?;
    if bytes.len() < 12 {
        return Err(NnError::Format(format!(
            "file is {} bytes, shorter than the fixed 12-byte prologue",
            bytes.len()
        )));
    }
    if bytes[0..4] != MODEL_MAGIC {
        return Err(NnError::Format(format!(
            "bad magic bytes {:02x?}",
            &bytes[0..4]
        )));
    }
    let version = read_u32(&bytes, 4);
    if version != MODEL_VERSION {
        return Err(NnError::Version {
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let header_len = read_u32(&bytes, 8) as usize;
    let blob_start = 12 + header_len;
    if blob_start > bytes.len() {
        return Err(NnError::Format(format!(
            "header claims {header_len} bytes but only {} remain",
            bytes.len() - 12
        )));
    }
    let header: Header = serde_json::from_slice(&bytes[12..blob_start])
        .map_err(|e| NnError::Format(format!("header is not valid JSON: {e}")))?;
    let blob = &bytes[blob_start..];

    let mut model = CnnModel::<f32>::from_specs(header.input_size, header.seed, header.layers)?;
    let mut blob_iter = header.blobs.iter();
    for (idx, layer) in model.layers_mut().iter_mut().enumerate() {
        let (w, b) = match layer {
            Layer::Conv(c) => (&mut c.weights, &mut c.bias),
            Layer::Dense(d) => (&mut d.weights, &mut d.bias),
            _ => continue,
        };
        let entry = blob_iter.next().ok_or_else(|| {
            NnError::Format(format!("no blob entry for parameterized layer {idx}"))
        })?;
        if entry.layer != idx {
            return Err(NnError::Format(format!(
                "blob entry for layer {} found where layer {idx} was expected",
                entry.layer
            )));
        }
        read_f32s(blob, entry.weights_offset, entry.weights_len, w, idx)?;
        read_f32s(blob, entry.bias_offset, entry.bias_len, b, idx)?;
    }
    if blob_iter.next().is_some() {
        return Err(NnError::Format("more blob entries than layers".into()));
    }
    Ok(model)
}

fn read_f32s(
    blob: &[u8],
    offset: u64,
    len: u64,
    dst: &mut [f32],
    layer: usize,
) -> Result<(), NnError> {
    if len as usize != dst.len() {
        return Err(NnError::Format(format!(
            "layer {layer}: expected {} values, file has {len}",
            dst.len()
        )));
    }
    let start = offset as usize;
    let end = start + len as usize * 4;
    if end > blob.len() {
        return Err(NnError::Format(format!(
            "layer {layer}: blob range {start}..{end} exceeds {} bytes",
            blob.len()
        )));
    }
    for (v, chunk) in dst.iter_mut().zip(blob[start..end].chunks_exact(4)) {
        *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
    }
    Ok(())
}
