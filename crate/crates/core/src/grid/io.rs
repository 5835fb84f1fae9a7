//! The QTAF1 binary field format.
//!
//! Layout: `"QTAF"`, u8 version, u8 dimension, u8 scalar kind (0 real, 1
//! complex), one u32 node count per axis, f64 half width, then the values in
//! row-major order, complex values as `(re, im)` pairs. All numbers are
//! little-endian. An optional trailer `"META"`, u32 length, UTF-8 text may
//! follow the values; readers that stop after the values never see it.

use std::fs;
use std::path::Path;

use super::{ComplexField, Grid, RealField, C64};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QTAF";
const TRAILER: &[u8; 4] = b"META";
pub const QTAF_VERSION: u8 = 1;

/// A field read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub enum StoredField {
    Real(RealField),
    Complex(ComplexField),
}

impl StoredField {
    pub fn grid(&self) -> &Grid {
        match self {
            Self::Real(f) => f.grid(),
            Self::Complex(f) => f.grid(),
        }
    }

    pub fn into_real(self) -> Result<RealField> {
        match self {
            Self::Real(f) => Ok(f),
            Self::Complex(_) => Err(Error::Format(
                "expected a real field, found a complex one".into(),
            )),
        }
    }

    /// Real fields are promoted with zero imaginary part.
    pub fn into_complex(self) -> Result<ComplexField> {
        match self {
            Self::Real(f) => Ok(f.to_complex()),
            Self::Complex(f) => Ok(f),
        }
    }
}

fn header(grid: &Grid, kind: u8, capacity: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(capacity);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[QTAF_VERSION, grid.dim() as u8, kind]);
    for _ in 0..grid.dim() {
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    }
    out.extend_from_slice(&grid.half_width().to_le_bytes());
    out
}

fn push_meta(out: &mut Vec<u8>, meta: Option<&str>) {
    if let Some(text) = meta {
        out.extend_from_slice(TRAILER);
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
    }
}

pub fn encode_real(field: &RealField, meta: Option<&str>) -> Vec<u8> {
    let mut out = header(field.grid(), 0, 32 + 8 * field.len());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    push_meta(&mut out, meta);
    out
}

pub fn encode_complex(field: &ComplexField, meta: Option<&str>) -> Vec<u8> {
    let mut out = header(field.grid(), 1, 32 + 16 * field.len());
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    push_meta(&mut out, meta);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "truncated QTAF data at byte {}",
                self.pos
            )));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses a QTAF1 buffer; returns the field and the trailer text, if any.
pub fn decode(bytes: &[u8]) -> Result<(StoredField, Option<String>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("missing QTAF magic".into()));
    }
    let version = r.u8()?;
    if version != QTAF_VERSION {
        return Err(Error::Format(format!("unsupported QTAF version {version}")));
    }
    let dim = r.u8()? as usize;
    let kind = r.u8()?;
    if !(2..=3).contains(&dim) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let counts: Vec<u32> = (0..dim).map(|_| r.u32()).collect::<Result<_>>()?;
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(Error::Format(format!("non-cubic node counts {counts:?}")));
    }
    let half_width = r.f64()?;
    let grid =
        Grid::new(dim, counts[0] as usize, half_width).map_err(|e| Error::Format(e.to_string()))?;
    let field = match kind {
        0 => {
            let values = (0..grid.len())
                .map(|_| r.f64())
                .collect::<Result<Vec<_>>>()?;
            StoredField::Real(RealField::new(grid, values)?)
        }
        1 => {
            let values = (0..grid.len())
                .map(|_| Ok(C64::new(r.f64()?, r.f64()?)))
                .collect::<Result<Vec<_>>>()?;
            StoredField::Complex(ComplexField::new(grid, values)?)
        }
        other => return Err(Error::Format(format!("unknown scalar kind {other}"))),
    };
    let meta = if r.pos == bytes.len() {
        None
    } else {
        if r.take(4)? != TRAILER {
            return Err(Error::Format("unexpected bytes after field values".into()));
        }
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Format(e.to_string()))?;
        if r.pos != bytes.len() {
            return Err(Error::Format("unexpected bytes after trailer".into()));
        }
        Some(text.to_owned())
    };
    Ok((field, meta))
}

pub fn write_real(path: &Path, field: &RealField, meta: Option<&str>) -> Result<()> {
    Ok(fs::write(path, encode_real(field, meta))?)
}

pub fn write_complex(path: &Path, field: &ComplexField, meta: Option<&str>) -> Result<()> {
    Ok(fs::write(path, encode_complex(field, meta))?)
}

pub fn read_field(path: &Path) -> Result<(StoredField, Option<String>)> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode(&bytes)
}
