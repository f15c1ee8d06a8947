//! Binary model container.
//!
//! Layout: the 8 magic bytes `PCDCKPT1`, the manifest length as a
//! little-endian `u64`, the UTF-8 JSON manifest, then every parameter's
//! values as little-endian `f64` in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"PCDCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    /// Model description and hyperparameters, owned by the caller.
    pub model: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

pub fn to_bytes(model: &serde_json::Value, store: &ParamStore) -> Result<Vec<u8>, NnError> {
    let manifest = Manifest {
        format: 1,
        model: model.clone(),
        tensors: store
            .ids()
            .map(|id| {
                let t = store.value(id);
                TensorEntry {
                    name: store.name(id).to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                }
            })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + store.scalar_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for id in store.ids() {
        for v in store.value(id).data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Manifest, ParamStore), NnError> {
    let bad = |m: &str| NnError::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16usize.saturating_add(len))
        .ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest =
        serde_json::from_slice(body).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let mut offset = 16 + len;
    let mut store = ParamStore::new();
    for t in &manifest.tensors {
        let n = t.rows * t.cols;
        let raw = bytes
            .get(offset..offset + n * 8)
            .ok_or_else(|| bad(&format!("truncated tensor {}", t.name)))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        store.add(t.name.clone(), Tensor::new(t.rows, t.cols, data)?);
        offset += n * 8;
    }
    if offset != bytes.len() {
        return Err(bad(&format!("{} trailing bytes", bytes.len() - offset)));
    }
    Ok((manifest, store))
}

pub fn save(path: &Path, model: &serde_json::Value, store: &ParamStore) -> Result<(), NnError> {
    let bytes = to_bytes(model, store)?;
    std::fs::write(path, bytes).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<(Manifest, ParamStore), NnError> {
    let bytes =
        std::fs::read(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
    from_bytes(&bytes)
}
