//! SHA-256 digests and the canonical length-prefixed byte encoding.
//!
//! Every committed or signed object is hashed over its canonical encoding:
//! fields are concatenated in declaration order, each field written as an
//! 8-byte big-endian length followed by the field bytes. Integers are 8-byte
//! big-endian, reals are IEEE-754 bit patterns in big-endian order, strings
//! are UTF-8, lists are a count field followed by one field per element.
//! The byte layout is documented in `docs/FORMATS.md`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};

/// A 32-byte SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let raw = hex::decode(s).map_err(|e| Error::Encoding(format!("bad hex digest: {e}")))?;
        let arr: [u8; 32] = raw
            .try_into()
            .map_err(|_| Error::Encoding("digest must be 32 bytes".into()))?;
        Ok(Digest(arr))
    }

    /// Flip one bit; used by mutation tests and fault injection.
    pub fn with_bit_flipped(mut self, bit: usize) -> Self {
        self.0[(bit / 8) % 32] ^= 1 << (bit % 8);
        self
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

pub fn sha256(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

/// Hash the concatenation of several byte slices.
pub fn sha256_concat(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Builder for canonical encodings.
#[derive(Debug, Default, Clone)]
pub struct CanonicalWriter {
    buf: Vec<u8>,
}

impl CanonicalWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(&(b.len() as u64).to_be_bytes());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.bytes(&v.to_bits().to_be_bytes())
    }

    pub fn digest(&mut self, d: &Digest) -> &mut Self {
        self.bytes(&d.0)
    }

    pub fn f64_list(&mut self, vs: &[f64]) -> &mut Self {
        self.u64(vs.len() as u64);
        for v in vs {
            self.f64(*v);
        }
        self
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }

    pub fn hash(&mut self) -> Digest {
        sha256(&self.finish())
    }
}

/// Reader for canonical encodings. Every accessor consumes exactly one field.
#[derive(Debug)]
pub struct CanonicalReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> CanonicalReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let rest = &self.buf[self.pos..];
        if rest.len() < 8 {
            return Err(Error::Encoding("truncated length prefix".into()));
        }
        let len = u64::from_be_bytes(rest[..8].try_into().unwrap()) as usize;
        if rest.len() - 8 < len {
            return Err(Error::Encoding(format!("field of length {len} overruns buffer")));
        }
        self.pos += 8 + len;
        Ok(&rest[8..8 + len])
    }

    pub fn str(&mut self) -> Result<String> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|e| Error::Encoding(e.to_string()))
    }

    fn fixed8(&mut self) -> Result<[u8; 8]> {
        self.bytes()?
            .try_into()
            .map_err(|_| Error::Encoding("expected an 8-byte field".into()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.fixed8()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_be_bytes(self.fixed8()?)))
    }

    pub fn digest(&mut self) -> Result<Digest> {
        let b: [u8; 32] = self
            .bytes()?
            .try_into()
            .map_err(|_| Error::Encoding("expected a 32-byte digest".into()))?;
        Ok(Digest(b))
    }

    pub fn f64_list(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > self.buf.len() {
            return Err(Error::Encoding("list count exceeds buffer".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Encoding(format!(
                "{} trailing bytes after last field",
                self.buf.len() - self.pos
            )))
        }
    }
}
