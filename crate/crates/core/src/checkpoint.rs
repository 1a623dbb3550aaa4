//! Flat binary parameter checkpoints.
//!
//! Layout: magic `"HGF1"`, a length-prefixed UTF-8 header blob (model
//! kind and architecture hyperparameters, JSON), then one record per
//! parameter: name length, name bytes, rank, extents, and the values as
//! 64-bit little-endian floats. Round trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tensor};

const MAGIC: &[u8; 4] = b"HGF1";

pub fn encode(meta: &str, params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(String, Vec<(String, Tensor)>)> {
    let mut r = Cursor { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::data(format!(
            "bad checkpoint magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let meta_len = r.u32()? as usize;
    let meta = String::from_utf8(r.take(meta_len)?.to_vec())
        .map_err(|e| Error::data(format!("checkpoint header is not UTF-8: {e}")))?;
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|e| Error::data(format!("parameter name is not UTF-8: {e}")))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let raw = r.take(8)?;
            data.push(f64::from_le_bytes(raw.try_into().unwrap()));
        }
        params.push((name.clone(), Tensor::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::data(format!(
            "trailing {} bytes after last checkpoint record",
            bytes.len() - r.pos
        )));
    }
    Ok((meta, params))
}

pub fn write_file(path: &Path, meta: &str, params: &ParamSet) -> Result<()> {
    fs::write(path, encode(meta, params))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<(String, Vec<(String, Tensor)>)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    decode(&bytes)
}

/// Overwrite the values of an existing parameter set from decoded
/// checkpoint records. Names, order, and shapes must match exactly.
pub fn load_into(params: &mut ParamSet, records: &[(String, Tensor)]) -> Result<()> {
    if params.len() != records.len() {
        return Err(Error::data(format!(
            "checkpoint has {} parameters, model expects {}",
            records.len(),
            params.len()
        )));
    }
    for (i, (name, tensor)) in records.iter().enumerate() {
        let p = params.get_mut(i);
        if &p.name != name {
            return Err(Error::data(format!(
                "checkpoint parameter {i} is '{name}', model expects '{}'",
                p.name
            )));
        }
        if p.value.shape() != tensor.shape() {
            return Err(Error::data(format!(
                "checkpoint parameter '{name}' has shape {:?}, model expects {:?}",
                tensor.shape(),
                p.value.shape()
            )));
        }
        p.value = tensor.clone();
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::data("truncated checkpoint".to_string()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let raw = self.take(4)?;
        Ok(u32::from_le_bytes(raw.try_into().unwrap()))
    }
}
