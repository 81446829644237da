//! Binary field dump.
//!
//! Byte layout (all multi-byte values little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `RELSPIN\0`                          |
//! | 8      | 4    | format version (u32, currently 1)          |
//! | 12     | 4    | endianness tag 0x01020304 (u32)            |
//! | 16     | 4    | dimensionality d (u32)                     |
//! | 20     | 4    | space flag (u32: 0 position, 1 momentum)   |
//! | 24     | 24   | N per axis (3 × u64)                       |
//! | 48     | 24   | L per axis (3 × f64)                       |
//! | 72     | ...  | amplitudes, point-major, 4 components each, re then im (f64) |
//!
//! Points follow the in-memory ordering (row-major, z fastest).

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::{GridSpec, Space, SpinorField};
use crate::error::{Error, Result};

pub const DUMP_MAGIC: [u8; 8] = *b"RELSPIN\0";
const VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

pub fn write_field(field: &SpinorField, mut w: impl Write) -> Result<()> {
    let g = field.grid();
    w.write_all(&DUMP_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&ENDIAN_TAG.to_le_bytes())?;
    w.write_all(&(g.dim as u32).to_le_bytes())?;
    let space: u32 = match field.space() {
        Space::Position => 0,
        Space::Momentum => 1,
    };
    w.write_all(&space.to_le_bytes())?;
    for n in g.n {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for l in g.l {
        w.write_all(&l.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(field.data().len() * 64);
    for v in field.data() {
        for z in v {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

pub fn read_field(mut r: impl Read) -> Result<SpinorField> {
    let bad = |m: &str| Error::InvalidArgument(format!("field dump: {m}"));
    let mut header = [0u8; 72];
    r.read_exact(&mut header)?;
    if header[..8] != DUMP_MAGIC {
        return Err(bad("bad magic"));
    }
    if u32_at(&header, 8) != VERSION {
        return Err(bad("unsupported version"));
    }
    if u32_at(&header, 12) != ENDIAN_TAG {
        return Err(bad("endianness tag mismatch"));
    }
    let dim = u32_at(&header, 16) as usize;
    let space = match u32_at(&header, 20) {
        0 => Space::Position,
        1 => Space::Momentum,
        _ => return Err(bad("bad space flag")),
    };
    let n = [0, 1, 2].map(|a| u64_at(&header, 24 + 8 * a) as usize);
    let l = [0, 1, 2].map(|a| f64_at(&header, 48 + 8 * a));
    let grid = GridSpec { dim, n, l };
    grid.validate()?;
    let mut body = vec![0u8; grid.len() * 64];
    r.read_exact(&mut body)?;
    let data = body.chunks_exact(64).map(|p| [0, 1, 2, 3].map(|c| C64::new(f64_at(p, 16 * c), f64_at(p, 16 * c + 8)))).collect();
    SpinorField::from_data(grid, space, data)
}
