//! Cube files in the NPY container.
//!
//! Cubes are written as little-endian, C-order arrays of shape `(K, I, J)`:
//! bands are the slowest axis and each band is row-major, which is exactly the
//! in-memory layout of [`Cube`]. In NumPy, `a[k]` is band `k + 1`.
//!
//! Reading accepts that layout and also Fortran-order arrays of shape
//! `(I, J, K)` (bands slowest, each band column-major), as written by
//! column-major tools. Both `<f4` and `<f8` payloads are accepted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Cube, Dims};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float32,
    Float64,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::Float32 => "<f4",
            Dtype::Float64 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::Float32 => 4,
            Dtype::Float64 => 8,
        }
    }

    fn from_descr(s: &str) -> Result<Self> {
        match s {
            "<f4" => Ok(Dtype::Float32),
            "<f8" => Ok(Dtype::Float64),
            other => Err(Error::NpyDtype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub dtype: Dtype,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

impl Header {
    /// Cube dimensions implied by the header's shape and order.
    pub fn dims(&self) -> Result<Dims> {
        let s = &self.shape;
        if s.len() != 3 {
            return Err(Error::NpyRank(s.clone()));
        }
        Ok(if self.fortran_order {
            Dims::new(s[0], s[1], s[2])
        } else {
            Dims::new(s[1], s[2], s[0])
        })
    }
}

fn format_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::NpyFormat {
        field,
        reason: reason.into(),
    }
}

/// Parses the Python dict literal of a version 1-3 header.
fn parse_header_dict(text: &str) -> Result<Header> {
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| format_err("header", "not a dict literal"))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest).ok_or_else(|| format_err("header", "expected a quoted key"))?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| format_err("header", format!("missing `:` after key `{key}`")))?
            .trim_start();
        let consumed = match key {
            "descr" => {
                let (v, tail) = take_quoted(after).ok_or_else(|| format_err("descr", "expected a quoted string"))?;
                descr = Some(v.to_string());
                tail
            }
            "fortran_order" => {
                if let Some(tail) = after.strip_prefix("True") {
                    fortran = Some(true);
                    tail
                } else if let Some(tail) = after.strip_prefix("False") {
                    fortran = Some(false);
                    tail
                } else {
                    return Err(format_err("fortran_order", "expected True or False"));
                }
            }
            "shape" => {
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| format_err("shape", "expected a tuple"))?;
                let close = inner.find(')').ok_or_else(|| format_err("shape", "unterminated tuple"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        p.parse::<usize>()
                            .map_err(|_| format_err("shape", format!("`{p}` is not a dimension")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(format_err("header", format!("unexpected key `{other}`"))),
        };
        rest = consumed.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }

    let descr = descr.ok_or_else(|| format_err("descr", "missing"))?;
    Ok(Header {
        dtype: Dtype::from_descr(&descr)?,
        fortran_order: fortran.ok_or_else(|| format_err("fortran_order", "missing"))?,
        shape: shape.ok_or_else(|| format_err("shape", "missing"))?,
    })
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let end = s[1..].find(q)?;
    Some((&s[1..1 + end], &s[end + 2..]))
}

/// Reads and validates the preamble, leaving `r` at the start of the payload.
pub fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)
        .map_err(|_| format_err("magic", "file is shorter than the NPY preamble"))?;
    if &magic != MAGIC {
        return Err(format_err("magic", "missing \\x93NUMPY signature"));
    }
    let mut version = [0u8; 2];
    r.read_exact(&mut version)
        .map_err(|_| format_err("version", "truncated"))?;
    let len = match version[0] {
        1 => {
            let mut b = [0u8; 2];
            r.read_exact(&mut b).map_err(|_| format_err("header_len", "truncated"))?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| format_err("header_len", "truncated"))?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(format_err("version", format!("unsupported major version {v}"))),
    };
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)
        .map_err(|_| format_err("header", format!("expected {len} header bytes")))?;
    let text = std::str::from_utf8(&text).map_err(|_| format_err("header", "not valid text"))?;
    parse_header_dict(text)
}

/// Reads a cube, converting the stored precision to `T`.
pub fn read_cube_from<T: Real>(r: &mut impl Read) -> Result<(Cube<T>, Dtype)> {
    let header = read_header(r)?;
    let dims = header.dims()?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = dims.len() * header.dtype.size();
    if payload.len() != expected {
        return Err(Error::NpyPayload {
            expected,
            actual: payload.len(),
        });
    }
    let values: Vec<T> = match header.dtype {
        Dtype::Float32 => payload
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect(),
        Dtype::Float64 => payload
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect(),
    };
    let cube = if header.fortran_order {
        let (rows, cols) = (dims.rows, dims.cols);
        Cube::from_fn(dims, |i, j, k| values[i + j * rows + k * rows * cols])
    } else {
        Cube::new(dims, values)?
    };
    Ok((cube, header.dtype))
}

pub fn read_cube<T: Real>(path: impl AsRef<Path>) -> Result<(Cube<T>, Dtype)> {
    let mut r = BufReader::new(File::open(path)?);
    read_cube_from(&mut r)
}

fn header_bytes(dims: Dims, dtype: Dtype) -> Vec<u8> {
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({}, {}, {}), }}",
        dtype.descr(),
        dims.bands,
        dims.rows,
        dims.cols
    );
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    let mut text = dict.into_bytes();
    text.extend(std::iter::repeat_n(b' ', pad));
    text.push(b'\n');
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + text.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(text.len() as u16).to_le_bytes());
    out.extend_from_slice(&text);
    out
}

/// Writes a version 1.0 file. `Dtype::Float32` rounds every value to single
/// precision.
pub fn write_cube_to<T: Real>(cube: &Cube<T>, dtype: Dtype, w: &mut impl Write) -> Result<()> {
    w.write_all(&header_bytes(cube.dims(), dtype))?;
    match dtype {
        Dtype::Float32 => {
            for v in cube.as_slice() {
                w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
            }
        }
        Dtype::Float64 => {
            for v in cube.as_slice() {
                w.write_all(&v.to_f64_lossy().to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_cube<T: Real>(cube: &Cube<T>, dtype: Dtype, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cube_to(cube, dtype, &mut w)?;
    w.flush()?;
    Ok(())
}
