//! Canonical, deterministic byte encoding for everything that crosses a
//! chain boundary or gets hashed, signed, or encrypted.
//!
//! Layout rules:
//! - variable-length byte strings and UTF-8 strings: 4-byte big-endian
//!   length prefix followed by the raw bytes
//! - integers: fixed-width big-endian (`u64` -> 8 bytes, `u32` -> 4 bytes)
//! - group elements and scalars: their canonical compressed encoding as a
//!   length-prefixed byte string
//! - digests: raw 32 bytes, no prefix
//!
//! Composite layouts are documented on the types that use them. Two equal
//! values always encode to identical bytes, which is what makes transcripts
//! bit-reproducible across runs.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("length prefix {0} exceeds remaining input")]
    BadLength(usize),
    #[error("invalid utf-8 in string field")]
    BadUtf8,
    #[error("invalid {0} encoding")]
    BadElement(&'static str),
    #[error("trailing bytes after value")]
    Trailing,
}

/// Append-only encoder over a byte buffer.
#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_bytes(&mut self, data: &[u8]) -> &mut Self {
        self.buf
            .extend_from_slice(&(data.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(data);
        self
    }

    pub fn put_str(&mut self, s: &str) -> &mut Self {
        self.put_bytes(s.as_bytes())
    }

    pub fn put_u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn put_u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn put_raw(&mut self, data: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(data);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor-based decoder matching [`Writer`].
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.data.len() {
            return Err(WireError::Truncated);
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn get_bytes(&mut self) -> Result<Vec<u8>, WireError> {
        let len = u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as usize;
        if self.pos + len > self.data.len() {
            return Err(WireError::BadLength(len));
        }
        Ok(self.take(len)?.to_vec())
    }

    pub fn get_str(&mut self) -> Result<String, WireError> {
        String::from_utf8(self.get_bytes()?).map_err(|_| WireError::BadUtf8)
    }

    pub fn get_u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_raw(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        self.take(n)
    }

    /// Fails unless the whole input has been consumed.
    pub fn expect_end(&self) -> Result<(), WireError> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(WireError::Trailing)
        }
    }
}
