//! `PGB1` projector bundle files.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "PGB1"
//! 4       4           u32 dim (D)
//! 8       4           u32 toxic rank
//! 12      4           u32 clean rank
//! 16      8           f64 relative rank tolerance
//! 24      1           u8 fingerprint flag (0 or 1)
//! 25      32 or 0     SHA-256 concept fingerprint, present iff flag = 1
//! ..      4*D*D       f32 toxic range projector, row-major
//! ..      4*D*D       f32 clean range projector, row-major
//! ..      4*D         f32 clean concept centroid
//! ```
//!
//! Nothing may follow the centroid.

use std::path::Path;

use crate::concepts::write_atomic;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::risk::ProjectorBundle;
use crate::subspace::Projector;

pub const MAGIC: &[u8; 4] = b"PGB1";

pub fn encode(bundle: &ProjectorBundle) -> Vec<u8> {
    let d = bundle.dim();
    let mut out = Vec::with_capacity(25 + 32 + 8 * d * d + 4 * d);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(bundle.toxic_rank() as u32).to_le_bytes());
    out.extend_from_slice(&(bundle.clean_rank() as u32).to_le_bytes());
    out.extend_from_slice(&bundle.rel_tol().to_le_bytes());
    match bundle.fingerprint() {
        Some(fp) => {
            out.push(1);
            out.extend_from_slice(fp);
        }
        None => out.push(0),
    }
    for p in [bundle.toxic_projector(), bundle.clean_projector()] {
        for v in p.matrix().as_slice() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    for v in bundle.clean_centroid() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("bundle truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        let vals: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("bundle contains non-finite values".into()));
        }
        Ok(vals)
    }
}

pub fn decode(bytes: &[u8]) -> Result<ProjectorBundle> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a PGB1 bundle (bad magic)".into()));
    }
    let dim = r.u32()? as usize;
    let toxic_rank = r.u32()? as usize;
    let clean_rank = r.u32()? as usize;
    let rel_tol = r.f64()?;
    if dim == 0 {
        return Err(Error::Format("bundle dim is zero".into()));
    }
    if !(rel_tol.is_finite() && rel_tol > 0.0) {
        return Err(Error::Format(format!("bad rank tolerance {rel_tol}")));
    }
    let fingerprint = match r.take(1)?[0] {
        0 => None,
        1 => Some(<[u8; 32]>::try_from(r.take(32)?).unwrap()),
        f => return Err(Error::Format(format!("bad fingerprint flag {f}"))),
    };
    let square = dim.checked_mul(dim).ok_or_else(|| Error::Format("dim overflow".into()))?;
    let toxic = r.f32s(square)?;
    let clean = r.f32s(square)?;
    let centroid = r.f32s(dim)?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after bundle", bytes.len() - r.pos)));
    }
    let toxic = Projector::from_parts(Matrix::new(dim, dim, toxic)?, toxic_rank, rel_tol)?;
    let clean = Projector::from_parts(Matrix::new(dim, dim, clean)?, clean_rank, rel_tol)?;
    ProjectorBundle::from_parts(toxic, clean, rel_tol, fingerprint, centroid)
}

pub fn save(bundle: &ProjectorBundle, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode(bundle))
}

pub fn load(path: impl AsRef<Path>) -> Result<ProjectorBundle> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
