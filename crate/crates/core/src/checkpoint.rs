//! Checkpoint archive: one safetensors file. Tensors are stored as F32
//! under their dotted parameter names; the header metadata carries
//! `format = "msense-checkpoint"`, `version = "1"` and `config`, a JSON
//! document describing the architecture needed to rebuild the model.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use crate::error::{Error, Result};

pub const FORMAT: &str = "msense-checkpoint";
pub const VERSION: &str = "1";

pub fn save(path: impl AsRef<Path>, tensors: &BTreeMap<String, Tensor>, config: &serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    let mut buffers = Vec::with_capacity(tensors.len());
    for (name, t) in tensors {
        let data: Vec<f32> = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
        let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
        buffers.push((name.clone(), t.dims().to_vec(), bytes));
    }
    let views = buffers
        .iter()
        .map(|(name, shape, bytes)| {
            TensorView::new(Dtype::F32, shape.clone(), bytes)
                .map(|v| (name.clone(), v))
                .map_err(|e| Error::Checkpoint(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let metadata = HashMap::from([
        ("format".to_string(), FORMAT.to_string()),
        ("version".to_string(), VERSION.to_string()),
        ("config".to_string(), config.to_string()),
    ]);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let bytes = safetensors::serialize(views, Some(metadata)).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let bytes = canonical_header(bytes)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Re-encodes the JSON header with sorted keys so identical checkpoints
/// are identical files; the metadata map otherwise serializes in hash order.
fn canonical_header(mut bytes: Vec<u8>) -> Result<Vec<u8>> {
    let bad = || Error::Checkpoint("serialized checkpoint has a malformed header".into());
    let len = u64::from_le_bytes(bytes.get(..8).ok_or_else(bad)?.try_into().map_err(|_| bad())?) as usize;
    let header = bytes.get(8..8 + len).ok_or_else(bad)?;
    let value: serde_json::Value = serde_json::from_slice(header)?;
    let mut sorted = serde_json::to_vec(&value)?;
    if sorted.len() > len {
        return Err(bad());
    }
    sorted.resize(len, b' ');
    bytes[8..8 + len].copy_from_slice(&sorted);
    Ok(bytes)
}

pub struct Loaded {
    pub tensors: BTreeMap<String, Tensor>,
    pub config: serde_json::Value,
}

pub fn load(path: impl AsRef<Path>) -> Result<Loaded> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let (_, meta) = SafeTensors::read_metadata(&bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let meta = meta.metadata().clone().unwrap_or_default();
    if meta.get("format").map(String::as_str) != Some(FORMAT) {
        return Err(Error::Checkpoint(format!("{} is not a {FORMAT} archive", path.display())));
    }
    if meta.get("version").map(String::as_str) != Some(VERSION) {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {:?}", meta.get("version"))));
    }
    let config = serde_json::from_str(meta.get("config").map(String::as_str).unwrap_or("null"))?;
    let mut tensors = BTreeMap::new();
    for (name, view) in st.tensors() {
        if view.dtype() != Dtype::F32 {
            return Err(Error::Checkpoint(format!("tensor `{name}` is {:?}, expected F32", view.dtype())));
        }
        let data: Vec<f32> = view
            .data()
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.insert(name, Tensor::from_vec(data, view.shape(), &Device::Cpu)?);
    }
    Ok(Loaded { tensors, config })
}
