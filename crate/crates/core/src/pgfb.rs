//! The PGFB binary field format.
//!
//! Layout: `b"PGFB"`, `u32` version, `u32` n, `u32` ncomponents, `u8` kind,
//! 7 zero bytes, then `n·n·ncomponents` little-endian `f64`, row-major with
//! components innermost. `ncomponents` counts `f64` values per node, so a
//! complex field declares 2. Symmetric slots are stored once: metrics as
//! `(g11, g12, g22)`, connections and endo-one-forms as
//! `(T¹₁₁, T¹₁₂, T¹₂₂, T²₁₁, T²₁₂, T²₂₂)`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Mat2, Tensor3, TorusGrid};

pub const MAGIC: &[u8; 4] = b"PGFB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    ScalarReal = 0,
    ScalarComplex = 1,
    Metric = 2,
    Connection = 3,
    EndoOneForm = 4,
    OneForm = 5,
    Vector = 6,
}

impl Kind {
    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Kind::ScalarReal,
            1 => Kind::ScalarComplex,
            2 => Kind::Metric,
            3 => Kind::Connection,
            4 => Kind::EndoOneForm,
            5 => Kind::OneForm,
            6 => Kind::Vector,
            _ => return None,
        })
    }

    pub fn components(self) -> usize {
        match self {
            Kind::ScalarReal => 1,
            Kind::ScalarComplex | Kind::OneForm | Kind::Vector => 2,
            Kind::Metric => 3,
            Kind::Connection | Kind::EndoOneForm => 6,
        }
    }
}

/// A field together with its PGFB kind.
#[derive(Clone, Debug, PartialEq)]
pub enum PgfbField {
    ScalarReal(Field<f64>),
    ScalarComplex(Field<Complex64>),
    Metric(Field<Mat2>),
    Connection(Field<Tensor3>),
    EndoOneForm(Field<Tensor3>),
    OneForm(Field<[f64; 2]>),
    Vector(Field<[f64; 2]>),
}

fn pack_sym3(t: &Tensor3) -> [f64; 6] {
    [t[0][0][0], t[0][0][1], t[0][1][1], t[1][0][0], t[1][0][1], t[1][1][1]]
}

fn unpack_sym3(v: &[f64]) -> Tensor3 {
    let mut t = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        t[i][0][0] = v[3 * i];
        t[i][0][1] = v[3 * i + 1];
        t[i][1][0] = v[3 * i + 1];
        t[i][1][1] = v[3 * i + 2];
    }
    t
}

impl PgfbField {
    pub fn kind(&self) -> Kind {
        match self {
            PgfbField::ScalarReal(_) => Kind::ScalarReal,
            PgfbField::ScalarComplex(_) => Kind::ScalarComplex,
            PgfbField::Metric(_) => Kind::Metric,
            PgfbField::Connection(_) => Kind::Connection,
            PgfbField::EndoOneForm(_) => Kind::EndoOneForm,
            PgfbField::OneForm(_) => Kind::OneForm,
            PgfbField::Vector(_) => Kind::Vector,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        match self {
            PgfbField::ScalarReal(f) => f.grid(),
            PgfbField::ScalarComplex(f) => f.grid(),
            PgfbField::Metric(f) => f.grid(),
            PgfbField::Connection(f) | PgfbField::EndoOneForm(f) => f.grid(),
            PgfbField::OneForm(f) | PgfbField::Vector(f) => f.grid(),
        }
    }

    fn node_values(&self) -> Vec<f64> {
        match self {
            PgfbField::ScalarReal(f) => f.values().to_vec(),
            PgfbField::ScalarComplex(f) => f.values().iter().flat_map(|z| [z.re, z.im]).collect(),
            PgfbField::Metric(f) => f
                .values()
                .iter()
                .flat_map(|m| [m[0][0], m[0][1], m[1][1]])
                .collect(),
            PgfbField::Connection(f) | PgfbField::EndoOneForm(f) => {
                f.values().iter().flat_map(pack_sym3).collect()
            }
            PgfbField::OneForm(f) | PgfbField::Vector(f) => {
                f.values().iter().flat_map(|v| *v).collect()
            }
        }
    }
}

pub fn encode(field: &PgfbField) -> Vec<u8> {
    let kind = field.kind();
    let n = field.grid().n();
    let values = field.node_values();
    let mut out = Vec::with_capacity(HEADER_LEN + values.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(kind.components() as u32).to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&[0u8; 7]);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| parse_err(bytes.len(), "truncated header"))
}

/// Decode a PGFB buffer; the lattice modulus is not stored and is supplied
/// by the caller.
pub fn decode(bytes: &[u8], tau: Complex64) -> Result<PgfbField> {
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(parse_err(0, "bad magic"));
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(parse_err(4, format!("unsupported version {version}")));
    }
    let n = read_u32(bytes, 8)? as usize;
    let grid = TorusGrid::with_tau(n, tau).map_err(|e| parse_err(8, e.to_string()))?;
    let ncomp = read_u32(bytes, 12)? as usize;
    let tag = *bytes
        .get(16)
        .ok_or_else(|| parse_err(bytes.len(), "truncated header"))?;
    let kind = Kind::from_tag(tag).ok_or_else(|| parse_err(16, format!("unknown kind {tag}")))?;
    if ncomp != kind.components() {
        return Err(parse_err(
            12,
            format!("kind {tag} needs {} components, found {ncomp}", kind.components()),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(bytes.len(), "truncated header"));
    }
    let expected = HEADER_LEN + n * n * ncomp * 8;
    if bytes.len() != expected {
        return Err(parse_err(
            bytes.len().min(expected),
            format!("payload size {} does not match {expected}", bytes.len()),
        ));
    }
    let mut values = Vec::with_capacity(n * n * ncomp);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(parse_err(HEADER_LEN + 8 * i, "non-finite value"));
        }
        values.push(v);
    }
    let node = |i: usize| &values[i * ncomp..(i + 1) * ncomp];
    let len = grid.len();
    Ok(match kind {
        Kind::ScalarReal => PgfbField::ScalarReal(Field::from_values(&grid, values.clone())?),
        Kind::ScalarComplex => PgfbField::ScalarComplex(Field::from_values(
            &grid,
            (0..len).map(|i| Complex64::new(node(i)[0], node(i)[1])).collect(),
        )?),
        Kind::Metric => PgfbField::Metric(Field::from_values(
            &grid,
            (0..len)
                .map(|i| {
                    let v = node(i);
                    [[v[0], v[1]], [v[1], v[2]]]
                })
                .collect(),
        )?),
        Kind::Connection | Kind::EndoOneForm => {
            let f = Field::from_values(&grid, (0..len).map(|i| unpack_sym3(node(i))).collect())?;
            if kind == Kind::Connection {
                PgfbField::Connection(f)
            } else {
                PgfbField::EndoOneForm(f)
            }
        }
        Kind::OneForm | Kind::Vector => {
            let f = Field::from_values(&grid, (0..len).map(|i| [node(i)[0], node(i)[1]]).collect())?;
            if kind == Kind::OneForm {
                PgfbField::OneForm(f)
            } else {
                PgfbField::Vector(f)
            }
        }
    })
}

pub fn write(path: impl AsRef<Path>, field: &PgfbField) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(field))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>, tau: Complex64) -> Result<PgfbField> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf, tau)
}
