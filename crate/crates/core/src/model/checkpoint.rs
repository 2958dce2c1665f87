//! Binary checkpoint container.
//!
//! ```text
//! "KSTRIP01" | u32 header_len | JSON header | f64 LE payload | u32 CRC-32
//! ```
//!
//! The header lists each tensor's name, role, shape and payload offset. Each
//! tensor is stored as its real plane followed by its imaginary plane. The CRC
//! covers the header length, the header and the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KStripConfig, KStripModel};
use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};
use crate::layers::ParamKind;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"KSTRIP01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorRole {
    Parameter,
    Buffer,
    /// Optimizer moment; ignored when rebuilding a model.
    Optimizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub role: TensorRole,
    pub tensor: ComplexTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: KStripConfig,
    pub tensors: Vec<TensorRecord>,
    /// Free-form training state (epoch, best validation loss, ...).
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    role: TensorRole,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: KStripConfig,
    tensors: Vec<ManifestEntry>,
    meta: serde_json::Value,
}

impl Checkpoint {
    pub fn from_model(model: &KStripModel) -> Self {
        let tensors = model
            .store
            .iter()
            .map(|(name, e)| TensorRecord {
                name: name.to_string(),
                role: match e.kind {
                    ParamKind::Trainable => TensorRole::Parameter,
                    ParamKind::Buffer => TensorRole::Buffer,
                },
                tensor: e.value.clone(),
            })
            .collect();
        Self { config: model.config.clone(), tensors, meta: serde_json::Value::Null }
    }

    pub fn into_model(&self) -> Result<KStripModel> {
        KStripModel::from_tensors(
            self.config.clone(),
            self.tensors
                .iter()
                .filter(|r| r.role != TensorRole::Optimizer)
                .map(|r| (r.name.as_str(), &r.tensor)),
        )
    }

    pub fn tensor(&self, name: &str) -> Option<&ComplexTensor> {
        self.tensors.iter().find(|r| r.name == name).map(|r| &r.tensor)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0u64;
        let manifest = self
            .tensors
            .iter()
            .map(|r| {
                let e = ManifestEntry {
                    name: r.name.clone(),
                    role: r.role,
                    shape: r.tensor.shape().to_vec(),
                    offset,
                };
                offset += 16 * r.tensor.len() as u64;
                e
            })
            .collect();
        let header = Header { config: self.config.clone(), tensors: manifest, meta: self.meta.clone() };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(8 + 4 + json.len() + offset as usize + 4);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for r in &self.tensors {
            for v in r.tensor.re().iter().chain(r.tensor.im()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[8..]);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            let found = String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned();
            return Err(Error::Format(format!("not a KSTRIP01 checkpoint (magic {found:?})")));
        }
        let body = &bytes[8..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::Integrity(format!("checkpoint CRC mismatch: stored {stored:08x}, computed {actual:08x}")));
        }
        let hlen = u32::from_le_bytes(body[..4].try_into().unwrap()) as usize;
        if 4 + hlen > body.len() {
            return Err(Error::Format("header length exceeds file".into()));
        }
        let header: Header =
            serde_json::from_slice(&body[4..4 + hlen]).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let payload = &body[4 + hlen..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let n: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let end = start + 16 * n;
            if end > payload.len() {
                return Err(Error::Format(format!("tensor {} runs past the payload", e.name)));
            }
            let read = |from: usize| -> Vec<f64> {
                payload[from..from + 8 * n]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            };
            let tensor = ComplexTensor::from_parts(&e.shape, read(start), read(start + 8 * n))?;
            tensors.push(TensorRecord { name: e.name, role: e.role, tensor });
        }
        Ok(Self { config: header.config, tensors, meta: header.meta })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
