// SPDX-License-Identifier: Apache-2.0

//! On-disk tensor formats.
//!
//! `BACAM1`: magic, u32 LE rows, u32 LE cols, then each row as `ceil(cols/8)`
//! LSB-first bytes.
//!
//! `BAINT1`: magic, u32 LE rows, u32 LE cols, u8 bit-width, u8 signed flag,
//! then row-major little-endian entries, each `ceil(bits/8)` bytes wide.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bitcore::{int_range, BitMatrix, BitVector, IntMatrix};
use crate::error::{Error, Result};

pub const BIT_MAGIC: &[u8; 6] = b"BACAM1";
pub const INT_MAGIC: &[u8; 6] = b"BAINT1";

/// Integer matrix together with its declared storage width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedMatrix {
    pub matrix: IntMatrix,
    pub bits: u8,
    pub signed: bool,
}

pub fn encode_bit_matrix(m: &BitMatrix) -> Vec<u8> {
    let row_bytes = m.n_cols().div_ceil(8);
    let mut out = Vec::with_capacity(14 + m.n_rows() * row_bytes);
    out.extend_from_slice(BIT_MAGIC);
    out.extend_from_slice(&(m.n_rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_cols() as u32).to_le_bytes());
    for r in m.rows() {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::Corrupt {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_header(path: &Path, bytes: &[u8], magic: &'static [u8; 6]) -> Result<(usize, usize)> {
    if bytes.len() < 6 || &bytes[..6] != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: std::str::from_utf8(magic).expect("ascii magic"),
        });
    }
    if bytes.len() < 14 {
        return Err(corrupt(path, "truncated header"));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(corrupt(path, format!("empty shape {rows}x{cols}")));
    }
    Ok((rows, cols))
}

/// `path` is only used to label errors.
pub fn decode_bit_matrix(path: &Path, bytes: &[u8]) -> Result<BitMatrix> {
    let (rows, cols) = read_header(path, bytes, BIT_MAGIC)?;
    let row_bytes = cols.div_ceil(8);
    let body = &bytes[14..];
    if body.len() != rows * row_bytes {
        return Err(corrupt(
            path,
            format!("expected {} payload bytes, found {}", rows * row_bytes, body.len()),
        ));
    }
    let tail = cols % 8;
    let mut out = Vec::with_capacity(rows);
    for chunk in body.chunks_exact(row_bytes) {
        if tail != 0 && chunk[row_bytes - 1] >> tail != 0 {
            return Err(corrupt(path, "nonzero padding bits"));
        }
        out.push(BitVector::from_le_bytes(cols, chunk)?);
    }
    BitMatrix::new(out)
}

pub fn encode_int_matrix(q: &QuantizedMatrix) -> Result<Vec<u8>> {
    q.matrix.check_range(q.bits, q.signed)?;
    let width = (q.bits as usize).div_ceil(8);
    let m = &q.matrix;
    let mut out = Vec::with_capacity(16 + m.data().len() * width);
    out.extend_from_slice(INT_MAGIC);
    out.extend_from_slice(&(m.n_rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_cols() as u32).to_le_bytes());
    out.push(q.bits);
    out.push(q.signed as u8);
    for &v in m.data() {
        out.extend_from_slice(&v.to_le_bytes()[..width]);
    }
    Ok(out)
}

pub fn decode_int_matrix(path: &Path, bytes: &[u8]) -> Result<QuantizedMatrix> {
    let (rows, cols) = read_header(path, bytes, INT_MAGIC)?;
    if bytes.len() < 16 {
        return Err(corrupt(path, "truncated header"));
    }
    let bits = bytes[14];
    let signed = match bytes[15] {
        0 => false,
        1 => true,
        f => return Err(corrupt(path, format!("signed flag {f} is not 0 or 1"))),
    };
    let (lo, hi) = int_range(bits, signed).map_err(|e| corrupt(path, e.to_string()))?;
    let width = (bits as usize).div_ceil(8);
    let body = &bytes[16..];
    if body.len() != rows * cols * width {
        return Err(corrupt(
            path,
            format!("expected {} payload bytes, found {}", rows * cols * width, body.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in body.chunks_exact(width).enumerate() {
        let mut raw = [0u8; 8];
        raw[..width].copy_from_slice(chunk);
        let mut v = i64::from_le_bytes(raw);
        if signed {
            let shift = 64 - 8 * width as u32;
            v = (v << shift) >> shift;
        }
        if v < lo || v > hi {
            return Err(corrupt(
                path,
                format!("entry {v} at ({}, {}) exceeds {bits}-bit range", i / cols, i % cols),
            ));
        }
        data.push(v);
    }
    Ok(QuantizedMatrix {
        matrix: IntMatrix::new(rows, cols, data)?,
        bits,
        signed,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: PathBuf::from(path),
        source,
    }
}

pub fn write_bit_matrix(path: &Path, m: &BitMatrix) -> Result<()> {
    fs::write(path, encode_bit_matrix(m)).map_err(io_err(path))
}

pub fn read_bit_matrix(path: &Path) -> Result<BitMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_bit_matrix(path, &bytes)
}

pub fn write_int_matrix(path: &Path, q: &QuantizedMatrix) -> Result<()> {
    fs::write(path, encode_int_matrix(q)?).map_err(io_err(path))
}

pub fn read_int_matrix(path: &Path) -> Result<QuantizedMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_int_matrix(path, &bytes)
}
