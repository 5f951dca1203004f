//! FVEC1 feature exchange format.
//!
//! Layout, all little-endian: the 5 magic bytes `FVEC1`, `u32` count, `u32`
//! dim, `count * dim` `f32` values row by row, then `count` ids each as a
//! `u32` byte length followed by UTF-8 bytes.

use std::path::Path;

use super::{FeatureSource, FeatureVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FVEC_MAGIC: &[u8; 5] = b"FVEC1";

pub fn encode_fvec<T: Scalar>(features: &[FeatureVector<T>]) -> Result<Vec<u8>> {
    let dim = features.first().map_or(0, |f| f.dim());
    let mut out = Vec::with_capacity(13 + features.len() * (dim * 4 + 16));
    out.extend_from_slice(FVEC_MAGIC);
    out.extend_from_slice(&u32::try_from(features.len()).map_err(|_| too_many())?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(dim).map_err(|_| too_many())?.to_le_bytes());
    for (i, f) in features.iter().enumerate() {
        if f.dim() != dim {
            return Err(Error::InvalidInput(format!(
                "vector {i} has dimension {}, expected {dim}",
                f.dim()
            )));
        }
        for v in &f.values {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    for f in features {
        let bytes = f.id.as_bytes();
        out.extend_from_slice(&u32::try_from(bytes.len()).map_err(|_| too_many())?.to_le_bytes());
        out.extend_from_slice(bytes);
    }
    Ok(out)
}

fn too_many() -> Error {
    Error::InvalidInput("feature set too large for FVEC1".into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let rest = self.buf.len() - self.pos;
        if rest < n {
            return Err(Error::Format(format!(
                "truncated FVEC1 {what}: expected {n} more bytes at offset {}, found {rest}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses an FVEC1 buffer; vectors come back tagged `External`.
pub fn decode_fvec<T: Scalar>(buf: &[u8]) -> Result<Vec<FeatureVector<T>>> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(5, "header")?;
    if magic != FVEC_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"FVEC1\"")));
    }
    let count = r.u32("header")? as usize;
    let dim = r.u32("header")? as usize;
    let payload = count
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("header count x dim overflows".into()))?;
    let have = buf.len() - r.pos;
    if have < payload {
        return Err(Error::Format(format!(
            "payload length mismatch: header says {count} x {dim} floats = {payload} bytes, found {have}"
        )));
    }
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let row = r.take(dim * 4, "payload")?;
        let mut v = Vec::with_capacity(dim);
        for (j, c) in row.chunks_exact(4).enumerate() {
            let x = f32::from_le_bytes(c.try_into().unwrap());
            if !x.is_finite() {
                return Err(Error::Format(format!("row {i} has non-finite value at column {j}")));
            }
            v.push(T::lit(x as f64));
        }
        values.push(v);
    }
    let mut out = Vec::with_capacity(count);
    for (i, v) in values.into_iter().enumerate() {
        let len = r.u32("id table")? as usize;
        let id = std::str::from_utf8(r.take(len, "id table")?)
            .map_err(|e| Error::Format(format!("id {i} is not UTF-8: {e}")))?;
        out.push(FeatureVector {
            id: id.to_string(),
            values: v,
            source: FeatureSource::External,
        });
    }
    if r.pos != buf.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after id table",
            buf.len() - r.pos
        )));
    }
    Ok(out)
}

pub fn write_fvec<T: Scalar>(path: impl AsRef<Path>, features: &[FeatureVector<T>]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_fvec(features)?).map_err(|e| Error::io(path, e))
}

pub fn read_fvec<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<FeatureVector<T>>> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fvec(&buf).map_err(|e| Error::file(path, e))
}
