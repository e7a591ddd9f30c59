//! Reference CNN weight container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"HZCNNW01"
//! 8       4     u32    input side S
//! 12      4     u32    class count N
//! 16      4     u32    tensor count (always 6)
//! then, per tensor in the order
//!   conv1.weight [16,3,3,3]   conv1.bias [16]
//!   conv2.weight [32,3,3,16]  conv2.bias [32]
//!   fc.weight    [N, 32*(S/4)^2]  fc.bias [N]
//!         2     u16    name length L
//!         L     utf-8  name
//!         1     u8     rank R
//!         4*R   u32    dims
//!         4*P   f32    values, P = product of dims, row-major
//! ```
//!
//! Conv weights are indexed `[out][ky][kx][in]`; `fc.weight` rows index the
//! pooled features as `(y * (S/4) + x) * 32 + channel`.
//!
//! Values are stored as `f32`; loading widens them to `f64` exactly, so a
//! save/load round trip is lossless for weights that were loaded from a file.

use std::path::Path;

use super::cnn::ReferenceCnnWeights;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HZCNNW01";

pub fn encode_weights(w: &ReferenceCnnWeights) -> Result<Vec<u8>> {
    w.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(w.input_side as u32).to_le_bytes());
    out.extend_from_slice(&(w.num_classes as u32).to_le_bytes());
    out.extend_from_slice(&6u32.to_le_bytes());
    let layout = ReferenceCnnWeights::layout(w.input_side, w.num_classes);
    for ((name, shape), values) in layout.iter().zip(w.tensors()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in values {
            let f = v as f32;
            if !f.is_finite() {
                return Err(Error::invalid(format!("{name}: value {v} overflows f32")));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(malformed("unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Malformed {
        kind: "weight file",
        reason: reason.into(),
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<ReferenceCnnWeights> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(malformed("bad magic"));
    }
    let side = cur.u32()? as usize;
    let classes = cur.u32()? as usize;
    let count = cur.u32()?;
    if count != 6 {
        return Err(malformed(format!("expected 6 tensors, found {count}")));
    }
    let mut w = ReferenceCnnWeights::zeros(side, classes).map_err(|e| malformed(e.to_string()))?;
    let layout = ReferenceCnnWeights::layout(side, classes);
    for ((name, shape), dst) in layout.iter().zip(w.tensors_mut()) {
        let len = {
            let b = cur.take(2)?;
            u16::from_le_bytes([b[0], b[1]]) as usize
        };
        let got = cur.take(len)?;
        if got != name.as_bytes() {
            return Err(malformed(format!(
                "expected tensor {name}, found {:?}",
                String::from_utf8_lossy(got)
            )));
        }
        let rank = cur.take(1)?[0] as usize;
        let dims = (0..rank)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if &dims != shape {
            return Err(malformed(format!("{name}: shape {dims:?}, expected {shape:?}")));
        }
        for (i, slot) in dst.iter_mut().enumerate() {
            let b = cur.take(4)?;
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            *slot = v as f64;
        }
    }
    if cur.pos != bytes.len() {
        return Err(malformed("trailing bytes"));
    }
    Ok(w)
}

pub fn save_weights(w: &ReferenceCnnWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(w)?).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ReferenceCnnWeights> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_after_f32_rounding() {
        let w = ReferenceCnnWeights::init(8, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let once = decode_weights(&encode_weights(&w).unwrap()).unwrap();
        for (a, b) in once.tensors().iter().zip(w.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
        let bytes = encode_weights(&once).unwrap();
        assert_eq!(encode_weights(&decode_weights(&bytes).unwrap()).unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let w = ReferenceCnnWeights::zeros(8, 3).unwrap();
        let bytes = encode_weights(&w).unwrap();
        assert_eq!(&bytes[..8], b"HZCNNW01");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(&bytes[16..20], &6u32.to_le_bytes());
        assert_eq!(&bytes[20..22], &12u16.to_le_bytes());
        assert_eq!(&bytes[22..22 + 12], b"conv1.weight");
        let params: usize = w.tensors().iter().map(|t| t.len()).sum();
        let names: usize = [
            "conv1.weight",
            "conv1.bias",
            "conv2.weight",
            "conv2.bias",
            "fc.weight",
            "fc.bias",
        ]
        .iter()
        .map(|n| 2 + n.len())
        .sum();
        let ranks = 1 + 4 * 4 + 1 + 4 + 1 + 4 * 4 + 1 + 4 + 1 + 2 * 4 + 1 + 4;
        assert_eq!(bytes.len(), 20 + names + ranks + 4 * params);
    }

    #[test]
    fn corrupt_files_rejected() {
        let w = ReferenceCnnWeights::zeros(8, 3).unwrap();
        let bytes = encode_weights(&w).unwrap();
        assert!(decode_weights(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_weights(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_weights(&bad).is_err());
        let mut renamed = bytes.clone();
        renamed[22] = b'k';
        assert!(decode_weights(&renamed).is_err());
    }
}
