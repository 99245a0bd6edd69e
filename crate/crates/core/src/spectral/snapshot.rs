//! Binary field snapshots.
//!
//! Layout, all little-endian: `b"STFN"`, `u32` version (1), `u32` n, `u32` reserved (0),
//! then `n * n` `f64` samples in row-major order (row = first coordinate).

use std::io::{Read, Write};

use super::{ScalarField, TorusGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"STFN";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(field.grid().n() as u32).to_le_bytes());
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&body)?;
    Ok(())
}

pub fn encode(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + field.values().len() * 8);
    write_snapshot(&mut out, field).expect("writing to a Vec cannot fail");
    out
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ScalarField> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let grid = TorusGrid::new(n)?;
    let mut body = vec![0u8; n * n * 8];
    r.read_exact(&mut body)?;
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::from_values(&grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = TorusGrid::new(4).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0] + 2.0 * x[1]);
        let bytes = encode(&f);
        assert_eq!(bytes.len(), 16 + 16 * 8);
        assert_eq!(&bytes[..4], b"STFN");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &4u32.to_le_bytes());
        // second sample is node (0, 1)
        assert_eq!(&bytes[24..32], &(-0.5 + 2.0 * -0.25f64).to_le_bytes());
        let back = read_snapshot(&bytes[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_snapshot(&b"NOPE\x01\0\0\0\x04\0\0\0\0\0\0\0"[..]).is_err());
        assert!(read_snapshot(&b"STFN\x02\0\0\0\x04\0\0\0\0\0\0\0"[..]).is_err());
        // truncated body
        assert!(read_snapshot(&b"STFN\x01\0\0\0\x04\0\0\0\0\0\0\0abc"[..]).is_err());
    }
}
