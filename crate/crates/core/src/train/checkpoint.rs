//! Binary tensor container.
//!
//! Layout (all integers little-endian):
//! `"SQMD"`, format version `u32`, tensor count `u32`, then per tensor:
//! name length `u32`, UTF-8 name, rank `u32`, `rank` dims as `u64`,
//! and the values as `f32` in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Tensor;

pub const MAGIC: &[u8; 4] = b"SQMD";
pub const FORMAT_VERSION: u32 = 1;

/// Ordered collection of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorFile {
    pub tensors: Vec<(String, Tensor)>,
}

impl TensorFile {
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Data(format!("checkpoint has no tensor `{name}`")))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.numel() * 4);
            for &v in t.data() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let bad = |m: &str| Error::Data(format!("malformed checkpoint: {m}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(&mut r).ok_or_else(|| bad("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r).ok_or_else(|| bad("truncated header"))?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = read_u32(&mut r).ok_or_else(|| bad("truncated name"))? as usize;
            if r.len() < name_len {
                return Err(bad("truncated name"));
            }
            let name = std::str::from_utf8(&r[..name_len])
                .map_err(|_| bad("name is not UTF-8"))?
                .to_string();
            r = &r[name_len..];
            let rank = read_u32(&mut r).ok_or_else(|| bad("truncated rank"))? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let d = read_u64(&mut r).ok_or_else(|| bad("truncated dims"))?;
                shape.push(usize::try_from(d).map_err(|_| bad("dimension too large"))?);
            }
            let n: usize = shape.iter().product();
            if r.len() < n * 4 {
                return Err(bad(&format!("truncated values for `{name}`")));
            }
            let data = r[..n * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            r = &r[n * 4..];
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(TensorFile { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_to(&mut f).map_err(|e| Error::io(path, e))?;
        f.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn read_u32(r: &mut &[u8]) -> Option<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).ok()?;
    Some(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Option<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).ok()?;
    Some(u64::from_le_bytes(b))
}

/// Stores a UTF-8 string as a rank-1 tensor of byte values.
pub fn string_tensor(s: &str) -> Tensor {
    Tensor::vector(s.bytes().map(f64::from).collect())
}

pub fn tensor_string(t: &Tensor) -> Result<String> {
    let bytes: Vec<u8> = t
        .data()
        .iter()
        .map(|&v| {
            if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                Ok(v as u8)
            } else {
                Err(Error::Data("string tensor holds a non-byte value".into()))
            }
        })
        .collect::<Result<_>>()?;
    String::from_utf8(bytes).map_err(|_| Error::Data("string tensor is not UTF-8".into()))
}
