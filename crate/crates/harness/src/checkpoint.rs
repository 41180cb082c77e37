//! Versioned binary checkpoints.
//!
//! All integers are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"JSSPCKPT"
//! 8       4     format version (u32) = 1
//! 12      8     seed (u64)
//! 20      4     metadata length L (u32)
//! 24      L     metadata, UTF-8 JSON: {"model": ModelConfig, "training": PpoConfig | null}
//! ..      4     tensor count T (u32)
//! T times:
//!         2     name length N (u16)
//!         N     name, UTF-8 (e.g. "gnn.1.disjunctive.w2", "actor.b3")
//!         4     rank R (u32)
//!         8*R   dims (u64 each), row-major
//!         8*P   values (f64 each), P = product of dims
//! ..      32    SHA-256 of every preceding byte
//! ```
//!
//! Tensors appear in the canonical parameter order: every embedding layer
//! (precedent, succedent, disjunctive, node networks), then the actor, then
//! the critic; each network contributes `w1 b1 w2 b2 w3 b3`. Weight matrices
//! are `(fan_in, fan_out)`, biases `(1, fan_out)`.

use std::fs;
use std::path::Path;

use jssp_core::agent::{ModelConfig, ParameterSet};
use jssp_core::ppo::PpoConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 8] = b"JSSPCKPT";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;
const TENSOR_SUFFIXES: [&str; 6] = ["w1", "b1", "w2", "b2", "w3", "b3"];
const LAYER_PARTS: [&str; 4] = ["precedent", "succedent", "disjunctive", "node"];

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("checkpoint version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("tensor `{name}`: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("checkpoint checksum mismatch")]
    Checksum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub training: Option<PpoConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub meta: CheckpointMeta,
    pub params: ParameterSet,
}

/// Tensor names in canonical order for a parameter set.
fn tensor_names(params: &ParameterSet) -> Vec<String> {
    let mut prefixes = Vec::new();
    for k in 0..params.gnn.layers().len() {
        for part in LAYER_PARTS {
            prefixes.push(format!("gnn.{k}.{part}"));
        }
    }
    prefixes.push("actor".into());
    prefixes.push("critic".into());
    prefixes.iter().flat_map(|p| TENSOR_SUFFIXES.iter().map(move |s| format!("{p}.{s}"))).collect()
}

/// `(name, shape, values)` of every tensor, canonical order.
fn tensors(params: &ParameterSet) -> Vec<(String, Vec<usize>, &[f64])> {
    let names = tensor_names(params);
    let mut out = Vec::with_capacity(names.len());
    let mut name_iter = names.into_iter();
    for mlp in params.mlps() {
        let mut offset = 0;
        for (r, c) in mlp.tensor_shapes() {
            let len = r * c;
            out.push((name_iter.next().expect("one name per tensor"), vec![r, c], &mlp.params()[offset..offset + len]));
            offset += len;
        }
    }
    out
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&ckpt.seed.to_le_bytes());
    let meta = serde_json::to_vec(&ckpt.meta).expect("plain data serializes");
    b.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    b.extend_from_slice(&meta);
    let ts = tensors(&ckpt.params);
    b.extend_from_slice(&(ts.len() as u32).to_le_bytes());
    for (name, shape, values) in ts {
        b.extend_from_slice(&(name.len() as u16).to_le_bytes());
        b.extend_from_slice(name.as_bytes());
        b.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in &shape {
            b.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in values {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&b);
    b.extend_from_slice(&digest);
    b
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() < n {
            return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "checkpoint is truncated").into());
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: VERSION });
    }
    if bytes.len() < DIGEST_LEN + 12 {
        return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "checkpoint is truncated").into());
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    let seed = r.u64()?;
    let meta_len = r.u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)?;
    // Shapes come from the declared architecture; the file must match them.
    let mut params = ParameterSet::new(meta.model, 0);
    let expected: Vec<(String, Vec<usize>)> =
        tensors(&params).into_iter().map(|(n, s, _)| (n, s)).collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(CheckpointError::ShapeMismatch {
            name: "<tensor count>".into(),
            expected: vec![expected.len()],
            found: vec![count],
        });
    }
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (ename, eshape) in &expected {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        if &name != ename || &shape != eshape {
            return Err(CheckpointError::ShapeMismatch { name, expected: eshape.clone(), found: shape });
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len * 8)?;
        values.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect());
    }
    if r.buf.len() != DIGEST_LEN {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "unexpected bytes after tensors").into());
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::Checksum);
    }
    let mut it = values.into_iter();
    for mlp in params.mlps_mut() {
        let mut flat = Vec::with_capacity(mlp.num_params());
        for _ in 0..TENSOR_SUFFIXES.len() {
            flat.extend(it.next().expect("counted above"));
        }
        mlp.params_mut().copy_from_slice(&flat);
    }
    Ok(Checkpoint { seed, meta, params })
}

/// Writes atomically: a sibling temp file renamed over `path`.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(ckpt))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    decode(&fs::read(path)?)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String, std::io::Error> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}
