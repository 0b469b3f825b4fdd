//! Self-describing binary container for model parameters.
//!
//! Layout: the 8-byte magic `BTCKPT\0\0`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a UTF-8 JSON header, then
//! every blob's values as little-endian `f64` in header order. The header
//! holds free-form metadata plus the name and shape of each blob.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NumericsError;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"BTCKPT\0\0";

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub blobs: Vec<Blob>,
}

#[derive(Serialize, Deserialize)]
struct BlobHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    blobs: Vec<BlobHeader>,
}

fn bad(msg: impl Into<String>) -> NumericsError {
    NumericsError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn blob(&self, name: &str) -> Result<&Blob, NumericsError> {
        self.blobs
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| bad(format!("missing blob `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, NumericsError> {
        for b in &self.blobs {
            if b.shape.iter().product::<usize>() != b.data.len() {
                return Err(bad(format!("blob `{}` shape does not match its data", b.name)));
            }
        }
        let header = Header {
            meta: self.meta.clone(),
            blobs: self
                .blobs
                .iter()
                .map(|b| BlobHeader { name: b.name.clone(), shape: b.shape.clone() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
        let values: usize = self.blobs.iter().map(|b| b.data.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * values);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for b in &self.blobs {
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, NumericsError> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(e.to_string()))?;
        let mut rest = &body[hlen..];
        let mut blobs = Vec::with_capacity(header.blobs.len());
        for bh in header.blobs {
            let n: usize = bh.shape.iter().product();
            if rest.len() < 8 * n {
                return Err(bad(format!("truncated data for blob `{}`", bh.name)));
            }
            let data = rest[..8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            rest = &rest[8 * n..];
            blobs.push(Blob { name: bh.name, shape: bh.shape, data });
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes after last blob"));
        }
        Ok(Checkpoint { meta: header.meta, blobs })
    }

    pub fn save(&self, path: &Path) -> Result<(), NumericsError> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, NumericsError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Checkpoint::from_bytes(&bytes)
    }
}
