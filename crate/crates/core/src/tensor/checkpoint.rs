//! Binary checkpoint container for named `f64` tensors.
//!
//! Layout: the 8-byte magic `LMCCKPT\0`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then the tensor payloads as little-endian
//! `f64` in header order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{NamedTensors, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"LMCCKPT\0";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("bad checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("tensor '{name}' has shape {shape:?} but {len} values")]
    Inconsistent {
        name: String,
        shape: Vec<usize>,
        len: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

pub fn write_checkpoint(
    mut w: impl Write,
    config: &serde_json::Value,
    tensors: &NamedTensors,
) -> Result<(), CheckpointError> {
    let header = Header {
        format_version: CHECKPOINT_VERSION,
        config: config.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| Entry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(tensors.numel() * 8);
    for t in tensors.tensors() {
        for x in t.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Returns the embedded config and the tensors.
pub fn read_checkpoint(
    mut r: impl Read,
) -> Result<(serde_json::Value, NamedTensors), CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(header.format_version));
    }
    let mut tensors = NamedTensors::new();
    for entry in header.tensors {
        let n: usize = entry.shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect::<Vec<_>>();
        let len = data.len();
        let t = Tensor::new(entry.shape.clone(), data).map_err(|_| CheckpointError::Inconsistent {
            name: entry.name.clone(),
            shape: entry.shape,
            len,
        })?;
        tensors.insert(entry.name, t);
    }
    Ok((header.config, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut t = NamedTensors::new();
        t.insert("a", Tensor::matrix(2, 2, vec![1.0, -0.0, 1e-300, std::f64::consts::PI]).unwrap());
        t.insert("b.bias", Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap());
        let cfg = serde_json::json!({"d_model": 8});
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &cfg, &t).unwrap();
        let (cfg2, t2) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(t.names(), t2.names());
        for (a, b) in t.tensors().iter().zip(t2.tensors()) {
            let bits = |x: &Tensor| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            read_checkpoint(&b"NOTACKPTxxxxxxxx"[..]),
            Err(CheckpointError::BadMagic)
        ));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &serde_json::json!({}), &{
            let mut t = NamedTensors::new();
            t.insert("x", Tensor::zeros(&[4]));
            t
        })
        .unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(CheckpointError::Io(_))));
    }
}
