//! Feature grid files: magic `ARTDFEAT`, `u32` L, `u32` D, then L·D
//! little-endian `f32` values in row-major order.

use std::path::{Path, PathBuf};

use artdesc_core::corpus::FeatureGrid;

use crate::error::AppResult;
use crate::formats::binary::{read_file, write_file, Reader, Writer};

pub const FEATURE_MAGIC: &[u8; 8] = b"ARTDFEAT";

pub fn encode_features(grid: &FeatureGrid) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(FEATURE_MAGIC);
    w.len_u32(grid.locations());
    w.len_u32(grid.dim());
    for &v in grid.values() {
        w.f32(v as f32);
    }
    w.into_inner()
}

pub fn decode_features(bytes: &[u8], path: &Path) -> AppResult<FeatureGrid> {
    let mut r = Reader::new(bytes, path);
    r.magic(FEATURE_MAGIC)?;
    let l = r.u32()? as usize;
    let d = r.u32()? as usize;
    if l == 0 || d == 0 {
        return Err(r.error(format!("empty grid {l}x{d}")));
    }
    let n = l
        .checked_mul(d)
        .filter(|n| n.checked_mul(4) == Some(r.remaining()))
        .ok_or_else(|| {
            r.error(format!(
                "{l}x{d} grid needs {} value bytes but {} remain",
                l.saturating_mul(d).saturating_mul(4),
                r.remaining()
            ))
        })?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.pos();
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(crate::error::AppError::format(
                path,
                format!("at byte {at}: non-finite feature value"),
            ));
        }
        values.push(f64::from(v));
    }
    Ok(FeatureGrid::new(l, d, values)?)
}

pub fn load_features(path: &Path) -> AppResult<FeatureGrid> {
    decode_features(&read_file(path)?, path)
}

pub fn save_features(path: &Path, grid: &FeatureGrid) -> AppResult<()> {
    write_file(path, &encode_features(grid))
}

/// Location of a painting's grid inside a feature directory.
pub fn feature_path(dir: &Path, painting_id: &str) -> PathBuf {
    dir.join(format!("{painting_id}.feat"))
}
