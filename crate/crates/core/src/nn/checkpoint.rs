//! `RCMW` parameter checkpoint files.
//!
//! All integers are little-endian.
//!
//! ```text
//! 0       4   magic "RCMW"
//! 4       2   format version (u16) = 1
//! 6       4   metadata length L (u32)
//! 10      L   metadata, UTF-8 (JSON architecture descriptor)
//! 10+L    4   tensor count N (u32)
//!             N manifest entries:
//!               2   name length (u16)
//!               *   name, UTF-8
//!               1   rank r (u8)
//!               4r  extents (u32 each)
//!               8   payload byte offset (u64), relative to payload start
//!         *   payload: f32 values of every tensor, manifest order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"RCMW";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn new(metadata: impl Into<String>) -> Self {
        Checkpoint {
            metadata: metadata.into(),
            tensors: Vec::new(),
        }
    }

    pub fn push<T: Scalar>(&mut self, name: impl Into<String>, tensor: &Tensor<T>) {
        self.tensors.push(TensorEntry {
            name: name.into(),
            shape: tensor.shape().to_vec(),
            data: tensor.data().iter().map(|v| v.as_f32()).collect(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&TensorEntry> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let meta = self.metadata.as_bytes();
        w.write_all(&u32::try_from(meta.len()).map_err(|_| Error::Format("metadata too large".into()))?.to_le_bytes())?;
        w.write_all(meta)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        let mut offset = 0u64;
        for t in &self.tensors {
            let name = t.name.as_bytes();
            let name_len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("name too long: {}", t.name)))?;
            w.write_all(&name_len.to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&[t.shape.len() as u8])?;
            for &d in &t.shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            w.write_all(&offset.to_le_bytes())?;
            offset += 4 * t.data.len() as u64;
        }
        for t in &self.tensors {
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated checkpoint header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad checkpoint magic {magic:?}, expected \"RCMW\"")));
        }
        let version = read_u16(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let meta_len = read_u32(&mut r)? as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta).map_err(truncated)?;
        let metadata = String::from_utf8(meta).map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let count = read_u32(&mut r)? as usize;
        let mut manifest = Vec::with_capacity(count);
        let mut expected_offset = 0u64;
        for _ in 0..count {
            let name_len = read_u16(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(truncated)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let mut rank = [0u8; 1];
            r.read_exact(&mut rank).map_err(truncated)?;
            let shape: Vec<usize> = (0..rank[0]).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<_>>()?;
            let mut off = [0u8; 8];
            r.read_exact(&mut off).map_err(truncated)?;
            let offset = u64::from_le_bytes(off);
            if offset != expected_offset {
                return Err(Error::Format(format!("tensor {name}: offset {offset}, expected {expected_offset}")));
            }
            expected_offset += 4 * shape.iter().product::<usize>() as u64;
            manifest.push((name, shape));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, shape) in manifest {
            let n: usize = shape.iter().product();
            let mut bytes = vec![0u8; 4 * n];
            r.read_exact(&mut bytes).map_err(truncated)?;
            let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            tensors.push(TensorEntry { name, shape, data });
        }
        Ok(Checkpoint { metadata, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn truncated(_: std::io::Error) -> Error {
    Error::Format("truncated checkpoint".into())
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}
