//! Parameter container shared by the decoder and filler checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "ARTDCKPT"
//! version    u32      CHECKPOINT_VERSION
//! meta_len   u32
//! meta       meta_len bytes of UTF-8 JSON (kind, config, digests, seed)
//! count      u32      number of tensors
//! tensor*    name (u32 length + UTF-8), ndim u32, dims u64 each,
//!            then prod(dims) f64 values
//! digest     32 bytes SHA-256 of everything above
//! ```

use std::path::Path;

use artdesc_core::numcore::Tensor;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::formats::binary::{read_file, write_file, Reader, Writer};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ARTDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn json_digest<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable"))
}

/// Decoded container contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<M> {
    pub meta: M,
    pub tensors: Vec<(String, Tensor)>,
}

pub fn encode_checkpoint<'a, M, I>(meta: &M, tensors: I) -> Vec<u8>
where
    M: Serialize,
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    let mut w = Writer::new();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    let meta = serde_json::to_vec(meta).expect("serializable");
    w.len_u32(meta.len());
    w.bytes(&meta);
    let tensors: Vec<_> = tensors.into_iter().collect();
    w.len_u32(tensors.len());
    for (name, t) in tensors {
        w.str(name);
        w.len_u32(t.shape().len());
        for &d in t.shape() {
            w.u64(d as u64);
        }
        for &v in t.data() {
            w.f64(v);
        }
    }
    let mut bytes = w.into_inner();
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    bytes
}

pub fn decode_checkpoint<M: DeserializeOwned>(
    bytes: &[u8],
    path: &Path,
) -> AppResult<Checkpoint<M>> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 32 {
        return Err(AppError::format(path, "file too short for a checkpoint"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let mut r = Reader::new(body, path);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.error(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(AppError::format(
            path,
            "checkpoint digest mismatch; the file is corrupt",
        ));
    }
    let meta_len = r.count(1)?;
    let at = r.pos();
    let meta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| AppError::format(path, format!("at byte {at}: bad metadata: {e}")))?;
    let count = r.count(1)?;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.str()?;
        let ndim = r.count(8)?;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
            .ok_or_else(|| {
                r.error(format!(
                    "tensor {name:?} of shape {shape:?} exceeds the file"
                ))
            })?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f64()?);
        }
        let t = Tensor::new(shape, data).map_err(|e| r.error(e))?;
        tensors.push((name, t));
    }
    r.finish()?;
    Ok(Checkpoint { meta, tensors })
}

pub fn save_checkpoint<'a, M, I>(path: &Path, meta: &M, tensors: I) -> AppResult<()>
where
    M: Serialize,
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    write_file(path, &encode_checkpoint(meta, tensors))
}

pub fn load_checkpoint<M: DeserializeOwned>(path: &Path) -> AppResult<Checkpoint<M>> {
    decode_checkpoint(&read_file(path)?, path)
}
