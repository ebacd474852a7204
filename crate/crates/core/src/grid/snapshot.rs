//! Binary `LLGF` field snapshots.
//!
//! Layout, little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `LLGF` |
//! | 4 | `u32` version = 1 |
//! | 4 | `u32` nx |
//! | 4 | `u32` ny |
//! | 8 | `f64` h |
//! | 1 | `u8` boundary code (0 periodic, 1 far-field) |
//! | 24·nx·ny | `f64` x, y, z per node, row-major |
//!
//! The far-field value is not part of the format; decoded fields carry a zero
//! far value.

use std::io::{Read, Write};

use super::{Boundary, GridSpec, Vec3, VectorField};
use crate::error::{LatticeError, Result};

pub const MAGIC: [u8; 4] = *b"LLGF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 1;

pub fn encode(field: &VectorField) -> Vec<u8> {
    let spec = field.spec();
    let mut out = Vec::with_capacity(HEADER_LEN + 24 * spec.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.ny() as u32).to_le_bytes());
    out.extend_from_slice(&spec.h().to_le_bytes());
    out.push(spec.boundary().code());
    for v in field.values() {
        for c in v.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<VectorField> {
    if bytes.len() < HEADER_LEN {
        return Err(LatticeError::Snapshot(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[0..4] != MAGIC {
        return Err(LatticeError::Snapshot("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(LatticeError::Snapshot(format!("unsupported version {version}")));
    }
    let nx = u32_at(8) as usize;
    let ny = u32_at(12) as usize;
    let h = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let boundary = Boundary::from_code(bytes[24])
        .ok_or_else(|| LatticeError::Snapshot(format!("unknown boundary code {}", bytes[24])))?;
    let spec = GridSpec::new(h, nx, ny, boundary)?;
    let expected = HEADER_LEN + 24 * spec.len();
    if bytes.len() != expected {
        return Err(LatticeError::Snapshot(format!(
            "expected {expected} bytes for a {nx}×{ny} field, got {}",
            bytes.len()
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    let values = payload
        .chunks_exact(24)
        .map(|c| {
            let f = |i: usize| f64::from_le_bytes(c[8 * i..8 * i + 8].try_into().unwrap());
            Vec3::new(f(0), f(1), f(2))
        })
        .collect();
    VectorField::new(spec, values)
}

pub fn write_to(field: &VectorField, mut w: impl Write) -> Result<()> {
    w.write_all(&encode(field))?;
    Ok(())
}

pub fn read_from(mut r: impl Read) -> Result<VectorField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VectorField {
        let spec = GridSpec::new(0.25, 5, 4, Boundary::ConstantFarField).unwrap();
        VectorField::from_fn(spec, |ix, iy| Vec3::new(ix as f64, iy as f64, -0.5))
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[0..4], b"LLGF");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[5, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[4, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &0.25f64.to_le_bytes());
        assert_eq!(bytes[24], 1);
        assert_eq!(bytes.len(), 25 + 24 * 20);
        // first value of node (1, 0): x = 1.0
        assert_eq!(&bytes[25 + 24..25 + 32], &1.0f64.to_le_bytes());
    }

    #[test]
    fn round_trip() {
        let f = sample();
        assert_eq!(decode(&encode(&f)).unwrap(), f);
    }

    #[test]
    fn rejects_truncated_and_corrupt_input() {
        let bytes = encode(&sample());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes;
        bad[24] = 7;
        assert!(decode(&bad).is_err());
    }
}
