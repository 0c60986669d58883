//! Little-endian helpers shared by the binary containers.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn with_header(magic: &[u8; 4]) -> Self {
        let mut enc = Encoder::default();
        enc.buf.extend_from_slice(magic);
        enc.u32(VERSION);
        enc
    }

    pub fn u8s(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s<'a>(&mut self, vals: impl IntoIterator<Item = &'a f32>) {
        for v in vals {
            self.f32(*v);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        fs::write(path, &self.buf).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Decoder<'a> {
    /// Checks the magic and version and positions the cursor after them.
    pub fn open(bytes: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != magic {
            return Err(Error::Format(format!(
                "{what}: bad magic, expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let mut dec = Decoder { bytes, pos: 4, what };
        let version = dec.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "{what}: unsupported version {version}"
            )));
        }
        Ok(dec)
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| {
                Error::Corrupt(format!(
                    "{}: truncated payload at byte {} (need {len} more, file has {})",
                    self.what,
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8s(&mut self, len: usize) -> Result<&'a [u8]> {
        self.take(len)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::Corrupt(format!("{}: element count overflows", self.what)))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    /// Reads a u64 length field that must fit the platform's usize.
    pub fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v <= i32::MAX as usize)
            .ok_or_else(|| Error::Format(format!("{}: dimension {v} out of range", self.what)))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Corrupt(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )))
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
