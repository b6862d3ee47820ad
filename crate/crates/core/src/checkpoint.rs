//! SGCP parameter checkpoints.
//!
//! Little-endian layout: magic "SGCP", version u32 = 1, metadata length u64
//! and that many bytes of UTF-8 JSON, blob count u64, then per blob: name
//! length u64, name bytes, rows u64, cols u64, and rows * cols f64 values.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::train::{Model, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SGCP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub blobs: Vec<(String, DenseMatrix)>,
}

/// Metadata stored with a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config: TrainConfig,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u64).to_le_bytes());
        out.extend_from_slice(self.metadata.as_bytes());
        out.extend_from_slice(&(self.blobs.len() as u64).to_le_bytes());
        for (name, m) in &self.blobs {
            out.extend_from_slice(&(name.len() as u64).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let meta_len = r.len()?;
        let metadata =
            String::from_utf8(r.take(meta_len)?.to_vec()).map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let count = r.len()?;
        let mut blobs = Vec::new();
        for _ in 0..count {
            let name_len = r.len()?;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("blob name is not UTF-8".into()))?;
            let rows = r.len()?;
            let cols = r.len()?;
            let len = rows
                .checked_mul(cols)
                .and_then(|v| v.checked_mul(8))
                .ok_or_else(|| Error::Format("blob size overflows".into()))?;
            let data =
                r.take(len)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            blobs.push((name, DenseMatrix::from_vec(rows, cols, data)?));
        }
        if r.at != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint { metadata, blobs })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn from_model(model: &Model) -> Result<Self> {
        let meta = ModelMeta { config: model.config.clone(), in_dim: model.in_dim, out_dim: model.out_dim };
        Ok(Checkpoint {
            metadata: serde_json::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?,
            blobs: model.params.params.iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        })
    }

    pub fn meta(&self) -> Result<ModelMeta> {
        serde_json::from_str(&self.metadata).map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))
    }

    /// Rebuilds the model. Every parameter must be present with its shape.
    pub fn to_model(&self) -> Result<Model> {
        let meta = self.meta()?;
        // Initial values are overwritten below.
        let mut model = Model::assemble(&meta.config, meta.in_dim, meta.out_dim, &mut Stream::new(0))?;
        if self.blobs.len() != model.params.len() {
            return Err(Error::CheckpointMismatch(format!(
                "{} blobs for a model with {} parameters",
                self.blobs.len(),
                model.params.len()
            )));
        }
        for p in &mut model.params.params {
            let (_, value) = self
                .blobs
                .iter()
                .find(|(name, _)| *name == p.name)
                .ok_or_else(|| Error::CheckpointMismatch(format!("missing parameter {}", p.name)))?;
            if value.shape() != p.value.shape() {
                return Err(Error::CheckpointMismatch(format!(
                    "{} has shape {:?}, model expects {:?}",
                    p.name,
                    value.shape(),
                    p.value.shape()
                )));
            }
            p.value = value.clone();
        }
        Ok(model)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit")))
    }
}
