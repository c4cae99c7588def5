//! Little-endian binary container shared by fitted models.
//!
//! Layout:
//!
//! ```text
//! "ICNF"            4 bytes magic
//! version           u32
//! kind              4 ASCII bytes ("PCA\0", "SVM\0", ...)
//! n_ints            u32, followed by n_ints x u64 header integers
//! n_reals           u32, followed by n_reals x f64 header reals
//! n_arrays          u32, each array: len u64 followed by len x f64
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ICNF";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FloatRecord {
    pub kind: [u8; 4],
    pub ints: Vec<u64>,
    pub reals: Vec<f64>,
    pub arrays: Vec<Vec<f64>>,
}

impl FloatRecord {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.kind)?;
        w.write_all(&(self.ints.len() as u32).to_le_bytes())?;
        for v in &self.ints {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.reals.len() as u32).to_le_bytes())?;
        for v in &self.reals {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.arrays.len() as u32).to_le_bytes())?;
        for a in &self.arrays {
            w.write_all(&(a.len() as u64).to_le_bytes())?;
            for v in a {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read, expected_kind: &[u8; 4]) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("not an ICNF model file"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported ICNF version {version}")));
        }
        let mut kind = [0u8; 4];
        r.read_exact(&mut kind)?;
        if &kind != expected_kind {
            return Err(Error::format(format!(
                "model kind {:?} does not match expected {:?}",
                String::from_utf8_lossy(&kind),
                String::from_utf8_lossy(expected_kind)
            )));
        }
        let n = read_u32(&mut r)? as usize;
        let ints = (0..n).map(|_| read_u64(&mut r)).collect::<Result<_>>()?;
        let n = read_u32(&mut r)? as usize;
        let reals = (0..n).map(|_| read_f64(&mut r)).collect::<Result<_>>()?;
        let n = read_u32(&mut r)? as usize;
        let mut arrays = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u64(&mut r)? as usize;
            let mut bytes = vec![0u8; len.checked_mul(8).ok_or_else(|| Error::format("array too large"))?];
            r.read_exact(&mut bytes)?;
            arrays.push(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                    .collect(),
            );
        }
        Ok(FloatRecord { kind, ints, reals, arrays })
    }

    pub(crate) fn expect_shape(&self, ints: usize, reals: usize, arrays: usize) -> Result<()> {
        if self.ints.len() != ints || self.reals.len() != reals || self.arrays.len() != arrays {
            return Err(Error::format("model record has an unexpected header layout"));
        }
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
