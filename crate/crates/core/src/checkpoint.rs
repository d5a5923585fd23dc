//! Versioned tensor archive used for model and training checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "SCKP" | version u32 | meta_len u32 | meta (JSON, UTF-8)
//! | tensor_count u32 | tensors...
//! tensor: name_len u16 | name | ndim u8 | dims u32 x ndim | f32 data
//! ```
//!
//! Writes are atomic (temp file + rename); any structural damage on read
//! fails closed with a corruption error and no partial state.

use crate::error::{CodecError, Result};
use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"SCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// JSON metadata plus named f32 tensors, sorted by name on write.
#[derive(Debug, Clone, Default)]
pub struct TensorArchive {
    pub meta: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor>,
}

impl TensorArchive {
    pub fn insert(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.tensors.insert(name.into(), Tensor { dims, data });
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| CodecError::Corruption(format!("checkpoint is missing tensor {name}")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            w.write_all(&MAGIC)?;
            w.write_all(&VERSION.to_le_bytes())?;
            let meta = serde_json::to_vec(&self.meta)
                .map_err(|e| CodecError::Corruption(format!("meta encode: {e}")))?;
            w.write_all(&(meta.len() as u32).to_le_bytes())?;
            w.write_all(&meta)?;
            w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
            for (name, t) in &self.tensors {
                let name_bytes = name.as_bytes();
                w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
                w.write_all(name_bytes)?;
                w.write_all(&[t.dims.len() as u8])?;
                for &d in &t.dims {
                    w.write_all(&(d as u32).to_le_bytes())?;
                }
                for &v in &t.data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            w.flush()?;
        }
        tmp.persist(path).map_err(|e| CodecError::Io(e.error))?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let mut r = BufReader::new(file);
        let corrupt = |what: &str| CodecError::Corruption(format!("checkpoint truncated in {what}"));

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| corrupt("header"))?;
        if magic != MAGIC {
            return Err(CodecError::Format("not a SCKP checkpoint".into()));
        }
        let version = read_u32(&mut r).map_err(|_| corrupt("header"))?;
        if version != VERSION {
            return Err(CodecError::Version {
                found: version,
                expected: VERSION,
            });
        }
        let meta_len = read_u32(&mut r).map_err(|_| corrupt("meta length"))? as usize;
        let mut meta_bytes = vec![0u8; meta_len];
        r.read_exact(&mut meta_bytes).map_err(|_| corrupt("meta"))?;
        let meta = serde_json::from_slice(&meta_bytes)
            .map_err(|e| CodecError::Corruption(format!("meta decode: {e}")))?;
        let count = read_u32(&mut r).map_err(|_| corrupt("tensor count"))? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = read_u16(&mut r).map_err(|_| corrupt("tensor name"))? as usize;
            let mut name_bytes = vec![0u8; name_len];
            r.read_exact(&mut name_bytes).map_err(|_| corrupt("tensor name"))?;
            let name = String::from_utf8(name_bytes)
                .map_err(|_| CodecError::Corruption("tensor name is not UTF-8".into()))?;
            let mut ndim = [0u8; 1];
            r.read_exact(&mut ndim).map_err(|_| corrupt("tensor dims"))?;
            let mut dims = Vec::with_capacity(ndim[0] as usize);
            for _ in 0..ndim[0] {
                dims.push(read_u32(&mut r).map_err(|_| corrupt("tensor dims"))? as usize);
            }
            let len: usize = dims.iter().product();
            let mut raw = vec![0u8; len * 4];
            r.read_exact(&mut raw).map_err(|_| corrupt(&format!("tensor {name}")))?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            tensors.insert(name, Tensor { dims, data });
        }
        Ok(Self { meta, tensors })
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16<R: Read>(r: &mut R) -> std::io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}
