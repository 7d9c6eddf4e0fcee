//! Retrieval index files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic       8 bytes "ARTDINDX"
//! version     u32     INDEX_VERSION
//! meta        u32 length + UTF-8 JSON (seed, config digest)
//! empty       u32     1 when no article was indexable, then nothing follows
//! stop words  u32 count, then strings (u32 length + UTF-8)
//! terms       u32 count, then strings
//! df          one u32 per term
//! idf         one f64 per term
//! documents   u32 count, then id strings
//! doc_ptr     count + 1 u64 row offsets into the CSR arrays
//! doc_terms   doc_ptr[last] u32 term ids
//! doc_weights doc_ptr[last] f64 weights
//! ```

use std::path::Path;

use crate::error::{AppError, AppResult};
use crate::formats::binary::{read_file, write_file, Reader, Writer};
use crate::formats::Stamp;
use artdesc_core::retriever::{IndexParts, TfIdfIndex};

pub const INDEX_MAGIC: &[u8; 8] = b"ARTDINDX";
pub const INDEX_VERSION: u32 = 1;

/// `None` stands for a knowledge base without indexable articles.
pub fn encode_index(index: Option<&TfIdfIndex>, meta: &Stamp) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(INDEX_MAGIC);
    w.u32(INDEX_VERSION);
    w.str(&serde_json::to_string(meta).expect("serializable"));
    let Some(index) = index else {
        w.u32(1);
        return w.into_inner();
    };
    w.u32(0);
    let p = index.to_parts();
    w.len_u32(p.stop_words.len());
    p.stop_words.iter().for_each(|s| w.str(s));
    w.len_u32(p.terms.len());
    p.terms.iter().for_each(|s| w.str(s));
    p.df.iter().for_each(|&d| w.u32(d));
    p.idf.iter().for_each(|&v| w.f64(v));
    w.len_u32(p.doc_ids.len());
    p.doc_ids.iter().for_each(|s| w.str(s));
    p.doc_ptr.iter().for_each(|&o| w.u64(o as u64));
    p.doc_terms.iter().for_each(|&t| w.u32(t));
    p.doc_weights.iter().for_each(|&v| w.f64(v));
    w.into_inner()
}

fn strings(r: &mut Reader<'_>) -> AppResult<Vec<String>> {
    let n = r.count(4)?;
    (0..n).map(|_| r.str()).collect()
}

pub fn decode_index(bytes: &[u8], path: &Path) -> AppResult<(Option<TfIdfIndex>, Stamp)> {
    let mut r = Reader::new(bytes, path);
    r.magic(INDEX_MAGIC)?;
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(r.error(format!("unsupported index version {version}")));
    }
    let meta_at = r.pos();
    let meta: Stamp = serde_json::from_str(&r.str()?)
        .map_err(|e| AppError::format(path, format!("at byte {meta_at}: bad metadata: {e}")))?;
    match r.u32()? {
        0 => {}
        1 => {
            r.finish()?;
            return Ok((None, meta));
        }
        other => return Err(r.error(format!("bad empty flag {other}"))),
    }
    let stop_words = strings(&mut r)?;
    let terms = strings(&mut r)?;
    let df = (0..terms.len())
        .map(|_| r.u32())
        .collect::<AppResult<Vec<_>>>()?;
    let idf = (0..terms.len())
        .map(|_| r.f64())
        .collect::<AppResult<Vec<_>>>()?;
    let doc_ids = strings(&mut r)?;
    let doc_ptr = (0..=doc_ids.len())
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<AppResult<Vec<_>>>()?;
    let nnz = *doc_ptr.last().expect("at least one offset");
    if nnz.saturating_mul(12) != r.remaining() {
        return Err(r.error(format!(
            "{nnz} stored weights do not match the remaining data"
        )));
    }
    let doc_terms = (0..nnz).map(|_| r.u32()).collect::<AppResult<Vec<_>>>()?;
    let doc_weights = (0..nnz).map(|_| r.f64()).collect::<AppResult<Vec<_>>>()?;
    r.finish()?;
    let parts = IndexParts {
        stop_words,
        terms,
        df,
        idf,
        doc_ids,
        doc_ptr,
        doc_terms,
        doc_weights,
    };
    let index = TfIdfIndex::from_parts(parts).map_err(|e| AppError::format(path, e.to_string()))?;
    Ok((Some(index), meta))
}

pub fn save_index(path: &Path, index: Option<&TfIdfIndex>, meta: &Stamp) -> AppResult<()> {
    write_file(path, &encode_index(index, meta))
}

pub fn load_index(path: &Path) -> AppResult<(Option<TfIdfIndex>, Stamp)> {
    decode_index(&read_file(path)?, path)
}
