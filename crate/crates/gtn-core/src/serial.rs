//! Binary container for MPS values.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset 0   magic "GTN1"
//!        4   M: u32 (site count)
//!        8   d: u32 (physical dimension)
//!        12  bond dims b[0..=M]: (M+1) x u32
//!        ...  per-site payload: d*b[m]*b[m+1] f64 values,
//!             row-major (s, a_left, a_right)
//! ```
//!
//! Round trips are bit-exact.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{GtnError, Result};
use crate::mps::Mps;
use crate::tensor::SiteTensor;

const MAGIC: &[u8; 4] = b"GTN1";

impl Mps {
    /// Serializes into the `GTN1` container.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.phys_dim() as u32).to_le_bytes())?;
        for b in self.bond_dims() {
            w.write_all(&(b as u32).to_le_bytes())?;
        }
        for site in self.sites() {
            for v in site.entries_row_major() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Deserializes from the `GTN1` container. Canonical-form metadata is not
    /// part of the format; the result carries no recorded center.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut reader = OffsetReader { inner: r, offset: 0 };
        let magic = reader.take::<4>("magic")?;
        if &magic != MAGIC {
            return Err(GtnError::Format {
                offset: 0,
                message: format!("bad magic {magic:02x?}, expected \"GTN1\""),
            });
        }
        let m = reader.read_u32("site count")? as usize;
        let d = reader.read_u32("physical dimension")? as usize;
        if m == 0 || d == 0 {
            return Err(GtnError::Format {
                offset: 4,
                message: format!("degenerate dimensions M={m}, d={d}"),
            });
        }
        let mut bonds = Vec::with_capacity(m + 1);
        for _ in 0..=m {
            bonds.push(reader.read_u32("bond dimension")? as usize);
        }
        if bonds[0] != 1 || bonds[m] != 1 {
            return Err(GtnError::Format {
                offset: 12,
                message: "boundary bonds must be 1".into(),
            });
        }
        let mut sites = Vec::with_capacity(m);
        for site in 0..m {
            let (l, rt) = (bonds[site], bonds[site + 1]);
            let mut mats = Vec::with_capacity(d);
            for _ in 0..d {
                let mut mat = DMatrix::zeros(l, rt);
                for a in 0..l {
                    for b in 0..rt {
                        mat[(a, b)] = reader.read_f64("tensor entry")?;
                    }
                }
                mats.push(mat);
            }
            sites.push(SiteTensor::from_mats(mats)?);
        }
        Mps::new(sites)
    }
}

struct OffsetReader<'a, R: Read> {
    inner: &'a mut R,
    offset: u64,
}

impl<R: Read> OffsetReader<'_, R> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        let at = self.offset;
        self.inner.read_exact(&mut buf).map_err(|e| GtnError::Format {
            offset: at,
            message: format!("truncated while reading {what}: {e}"),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take::<4>(what)?))
    }

    fn read_f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>(what)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mps = Mps::random(5, 2, 3, 99).unwrap();
        let mut buf = Vec::new();
        mps.write_to(&mut buf).unwrap();
        let back = Mps::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.bond_dims(), mps.bond_dims());
        for (a, b) in mps.sites().iter().zip(back.sites()) {
            for (x, y) in a.entries_row_major().zip(b.entries_row_major()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let mut buf2 = Vec::new();
        back.write_to(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn bad_magic_is_reported_at_offset_zero() {
        let err = Mps::read_from(&mut &b"NOPE\x01\x00\x00\x00"[..]).unwrap_err();
        match err {
            GtnError::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_names_the_offset() {
        let mps = Mps::random(3, 2, 2, 1).unwrap();
        let mut buf = Vec::new();
        mps.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        let err = Mps::read_from(&mut buf.as_slice()).unwrap_err();
        match err {
            GtnError::Format { offset, message } => {
                assert!(offset > 0);
                assert!(message.contains("tensor entry"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
