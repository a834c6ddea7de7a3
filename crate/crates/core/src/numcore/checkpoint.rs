//! Binary checkpoint codec.
//!
//! Little-endian: magic `SFK1`, format version `u32`, tensor count `u32`,
//! then per tensor the name length `u16`, the UTF-8 name, the rank `u8`,
//! each dimension as `u32` and the raw `f64` payload.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ParamStore, Tensor};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SFK1";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(params: &ParamStore) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + params.num_scalars() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let count = u32::try_from(params.len()).map_err(|_| Error::Checkpoint("too many tensors".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in params.iter() {
        let len = u16::try_from(name.len()).map_err(|_| Error::Checkpoint(format!("name too long: {name}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.shape.len()).map_err(|_| Error::Checkpoint(format!("rank too high: {name}")))?;
        out.push(rank);
        for &d in &t.shape {
            let d = u32::try_from(d).map_err(|_| Error::Checkpoint(format!("dimension too large: {name}")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParamStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = String::from(core::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?);
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if store.index_of(&name).is_ok() {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
        store.insert(name, Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = ParamStore::new();
        p.insert("a.w", Tensor::new(vec![2, 3], vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300, -7.25, 0.1]).unwrap());
        p.insert("b", Tensor::scalar(f64::NAN));
        let bytes = encode(&p).unwrap();
        assert_eq!(&bytes[..4], b"SFK1");
        let q = decode(&bytes).unwrap();
        assert_eq!(q.len(), 2);
        for ((na, ta), (nb, tb)) in p.iter().zip(q.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape, tb.shape);
            let bits = |t: &Tensor| t.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(ta), bits(tb));
        }
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let p = ParamStore::new();
        let mut bytes = encode(&p).unwrap();
        assert!(decode(&bytes[..6]).is_err());
        bytes.push(0);
        assert!(decode(&bytes).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
    }
}
