//! The `MSHG` little-endian grid file format.
//!
//! Layout: magic `MSHG`, `u32` version, `u32` n, `u32` dims[2n], `f64` h,
//! then one `f64` per node in row-major order with `NaN` on outside nodes.

use std::io::{Read, Write};

use std::sync::Arc;

use crate::error::{MshError, Result};
use crate::grid::{GridDomain, GridFunction};

pub const MAGIC: &[u8; 4] = b"MSHG";
pub const VERSION: u32 = 1;

/// Raw contents of an `MSHG` file.
#[derive(Debug, Clone, PartialEq)]
pub struct MshgGrid {
    pub n: usize,
    pub dims: Vec<usize>,
    pub h: f64,
    pub values: Vec<f64>,
}

impl MshgGrid {
    pub fn new(n: usize, dims: Vec<usize>, h: f64, values: Vec<f64>) -> Result<Self> {
        if dims.len() != 2 * n {
            return Err(MshError::Format(format!("expected {} axes, got {}", 2 * n, dims.len())));
        }
        let len: usize = dims.iter().product();
        if values.len() != len {
            return Err(MshError::Format(format!("expected {len} values, got {}", values.len())));
        }
        Ok(MshgGrid { n, dims, h, values })
    }

    /// Per-node values on `dom`, such as a function or a density field.
    pub fn from_grid(dom: &GridDomain, values: &[f64]) -> Result<Self> {
        MshgGrid::new(dom.n(), dom.dims().to_vec(), dom.h(), values.to_vec())
    }

    /// Reattach the values to a lattice with the same shape and spacing.
    pub fn to_function(&self, dom: Arc<GridDomain>) -> Result<GridFunction> {
        if self.n != dom.n() || self.dims != dom.dims() || (self.h - dom.h()).abs() > 1e-12 * dom.h() {
            return Err(MshError::DomainMismatch);
        }
        GridFunction::new(dom, self.values.clone())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&self.h.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for &v in &self.values {
            // one canonical NaN bit pattern keeps files byte-reproducible
            let v = if v.is_nan() { f64::NAN } else { v };
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| MshError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(MshError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(MshError::Format(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        if !(1..=3).contains(&n) {
            return Err(MshError::Format(format!("dimension {n}")));
        }
        let mut dims = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            dims.push(read_u32(&mut r)? as usize);
        }
        let h = read_f64(&mut r)?;
        let len: usize = dims.iter().product();
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(read_f64(&mut r)?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(MshError::Format("trailing bytes".into()));
        }
        MshgGrid::new(n, dims, h, values)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| MshError::Format("truncated".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| MshError::Format("truncated".into()))?;
    Ok(f64::from_le_bytes(b))
}
