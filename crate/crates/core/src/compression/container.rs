//! Binary container for compressed kernel matrices.
//!
//! Layout (little-endian): magic `SMPK`, u32 version, u64 N, u32 q, f64 eta,
//! u32 interpolation degree, u64 block count, then per block: u64 row
//! cluster, u64 column cluster, u64 row offset, u64 column offset, u8 near
//! flag, u64 rows, u64 columns and the row-major f64 values.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{Block, CompressedKernelMatrix};
use crate::basis::SampletBasis;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SMPK";
const VERSION: u32 = 1;

pub fn write_compressed<W: Write>(m: &CompressedKernelMatrix, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.len() as u64).to_le_bytes())?;
    w.write_all(&(m.q() as u32).to_le_bytes())?;
    w.write_all(&m.eta().to_le_bytes())?;
    w.write_all(&(m.interp_degree() as u32).to_le_bytes())?;
    w.write_all(&(m.blocks().len() as u64).to_le_bytes())?;
    for b in m.blocks() {
        for v in [b.row, b.col, b.row_offset, b.col_offset] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&[u8::from(b.near)])?;
        let (r, c) = b.values.shape();
        w.write_all(&(r as u64).to_le_bytes())?;
        w.write_all(&(c as u64).to_le_bytes())?;
        for i in 0..r {
            for j in 0..c {
                w.write_all(&b.values[(i, j)].to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated matrix container".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_u64<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u64::from_le_bytes(read_array(r)?) as usize)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(read_array(r)?) as usize)
}

/// Reads a container written for `basis`; block placement is validated
/// against the basis' coefficient slots.
pub fn read_compressed<R: Read>(mut r: R, basis: &SampletBasis) -> Result<CompressedKernelMatrix> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("not a compressed matrix container".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let n = read_u64(&mut r)?;
    if n != basis.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            got: n,
        });
    }
    let q = read_u32(&mut r)?;
    if q != basis.q() {
        return Err(Error::BasisMismatch);
    }
    let eta = f64::from_le_bytes(read_array(&mut r)?);
    let degree = read_u32(&mut r)?;
    let count = read_u64(&mut r)?;
    let nc = basis.tree().num_clusters();
    let mut blocks = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let row = read_u64(&mut r)?;
        let col = read_u64(&mut r)?;
        let row_offset = read_u64(&mut r)?;
        let col_offset = read_u64(&mut r)?;
        let near = read_array::<1, _>(&mut r)?[0] != 0;
        let rows = read_u64(&mut r)?;
        let cols = read_u64(&mut r)?;
        if row >= nc
            || col >= nc
            || basis.slots(row) != (row_offset..row_offset + rows)
            || basis.slots(col) != (col_offset..col_offset + cols)
        {
            return Err(Error::Format(format!("block ({row}, {col}) does not match the basis")));
        }
        let mut values = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                values[(i, j)] = f64::from_le_bytes(read_array(&mut r)?);
            }
        }
        blocks.push(Block {
            row,
            col,
            row_offset,
            col_offset,
            near,
            values,
        });
    }
    Ok(CompressedKernelMatrix::from_blocks(basis, eta, degree, blocks))
}
