//! Little-endian primitives shared by the binary formats.

use crate::error::{AppError, AppResult};
use std::path::Path;

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn len_u32(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }

    /// Length-prefixed UTF-8.
    pub fn str(&mut self, s: &str) {
        self.len_u32(s.len());
        self.bytes(s.as_bytes());
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over a byte buffer whose errors name the file and byte offset.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], path: &'a Path) -> Self {
        Reader { buf, pos: 0, path }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn error(&self, msg: impl std::fmt::Display) -> AppError {
        AppError::format(self.path, format!("at byte {}: {msg}", self.pos))
    }

    pub fn take(&mut self, n: usize) -> AppResult<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.error(format!(
                "need {n} bytes but only {} remain",
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> AppResult<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    pub fn u32(&mut self) -> AppResult<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> AppResult<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f32(&mut self) -> AppResult<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> AppResult<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// A `u32` count, rejected when it could not fit in the rest of the
    /// buffer at `min_item` bytes per item.
    pub fn count(&mut self, min_item: usize) -> AppResult<usize> {
        let at = self.pos;
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item) > self.remaining() {
            self.pos = at;
            return Err(self.error(format!("count {n} exceeds the remaining data")));
        }
        Ok(n)
    }

    pub fn str(&mut self) -> AppResult<String> {
        let n = self.count(1)?;
        let at = self.pos;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.pos_error(at, "invalid UTF-8 in string"))
    }

    fn pos_error(&self, at: usize, msg: &str) -> AppError {
        AppError::format(self.path, format!("at byte {at}: {msg}"))
    }

    pub fn magic(&mut self, expected: &[u8]) -> AppResult<()> {
        let at = self.pos;
        if self.remaining() < expected.len() || self.take(expected.len())? != expected {
            return Err(self.pos_error(at, "bad magic bytes"));
        }
        Ok(())
    }

    pub fn finish(&self) -> AppResult<()> {
        if self.remaining() != 0 {
            return Err(self.error(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

pub fn read_file(path: &Path) -> AppResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| AppError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}
