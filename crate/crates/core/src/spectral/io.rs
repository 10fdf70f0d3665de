//! Field containers on disk.
//!
//! Binary layout (all little-endian):
//! `b"AHLBFLD1"`, `u32` endianness tag `0x01020304`, `u32` kind, `u64` M,
//! then row-major `f64` payload. Scalars store `(re, im)` pairs per point;
//! connections store the `A¹` plane followed by the `A²` plane.

use num_complex::Complex64 as C64;
use std::io::{Read, Write};

use super::{ConnectionField, ScalarField, TorusGrid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AHLBFLD1";
const ENDIAN_TAG: u32 = 0x0102_0304;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Kind {
    Scalar = 0,
    Connection = 1,
}

/// Seventeen significant digits, round-trippable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line of [`fmt_f64`] values.
pub fn csv_row(vals: &[f64]) -> String {
    let mut s = vals.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn header<W: Write>(w: &mut W, kind: Kind, m: usize) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&ENDIAN_TAG.to_le_bytes())?;
    w.write_all(&(kind as u32).to_le_bytes())?;
    w.write_all(&(m as u64).to_le_bytes())?;
    Ok(())
}

pub fn write_scalar<W: Write>(w: &mut W, f: &ScalarField) -> Result<()> {
    header(w, Kind::Scalar, f.grid.m())?;
    for v in &f.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_connection<W: Write>(w: &mut W, a: &ConnectionField) -> Result<()> {
    header(w, Kind::Connection, a.grid.m())?;
    for c in &a.comps {
        for v in c {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Either field kind read back from a container.
#[derive(Clone, Debug)]
pub enum Stored {
    Scalar(ScalarField),
    Connection(ConnectionField),
}

pub fn read_field<R: Read>(r: &mut R) -> Result<Stored> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let tag = read_u32(r)?;
    if tag != ENDIAN_TAG {
        return Err(Error::Format(format!("unsupported endianness tag {tag:#x}")));
    }
    let kind = read_u32(r)?;
    let mut mb = [0u8; 8];
    r.read_exact(&mut mb)?;
    let m = u64::from_le_bytes(mb) as usize;
    let grid = TorusGrid::new(m)?;
    match kind {
        0 => {
            let v = read_f64s(r, 2 * grid.len())?;
            let vals = v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
            Ok(Stored::Scalar(ScalarField::new(&grid, vals)))
        }
        1 => {
            let a = read_f64s(r, grid.len())?;
            let b = read_f64s(r, grid.len())?;
            Ok(Stored::Connection(ConnectionField { grid, comps: [a, b], coulomb: false }))
        }
        k => Err(Error::Format(format!("unknown field kind {k}"))),
    }
}

/// `x1,x2,re,im` rows.
pub fn scalar_csv(f: &ScalarField) -> String {
    let mut s = String::from("x1,x2,re,im\n");
    for (i, v) in f.values.iter().enumerate() {
        let x = f.grid.point(i);
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(v.re),
            fmt_f64(v.im)
        ));
    }
    s
}

/// `x1,x2,a1,a2` rows.
pub fn connection_csv(a: &ConnectionField) -> String {
    let mut s = String::from("x1,x2,a1,a2\n");
    for i in 0..a.grid.len() {
        let x = a.grid.point(i);
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(a.comps[0][i]),
            fmt_f64(a.comps[1][i])
        ));
    }
    s
}
