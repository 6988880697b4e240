//! Bloom filter over encoded path keys.
//!
//! Bit positions come from double hashing: with `h1 = xxh64(key, seed 0)` and
//! `h2 = xxh64(key, seed 1)`, probe `i` sets bit `(h1 + i * h2) mod m` using
//! wrapping 64-bit arithmetic. Bit `j` lives in byte `j / 8` at mask
//! `1 << (j % 8)`. The filter bytes are part of the SSTable format, so this
//! must not change.

use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};
use crate::model::{PathKey, Reader};

pub const DEFAULT_BITS_PER_KEY: usize = 10;
pub const DEFAULT_HASHES: u8 = 7;
const MIN_BITS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    bits: Vec<u8>,
    m: u64,
    k: u8,
    n_added: u64,
}

impl BloomFilter {
    /// A filter with exactly `m` bits and `k` probes.
    pub fn with_bits(m: u64, k: u8) -> Self {
        let m = m.max(1);
        BloomFilter {
            bits: vec![0; m.div_ceil(8) as usize],
            m,
            k: k.max(1),
            n_added: 0,
        }
    }

    /// A filter sized for `expected_keys` at `bits_per_key`.
    pub fn for_keys(expected_keys: usize, bits_per_key: usize, k: u8) -> Self {
        let m = (expected_keys as u64 * bits_per_key as u64).max(MIN_BITS);
        Self::with_bits(m, k)
    }

    pub fn bit_count(&self) -> u64 {
        self.m
    }

    pub fn hash_count(&self) -> u8 {
        self.k
    }

    /// Keys added since construction; not persisted, zero after reload.
    pub fn n_added(&self) -> u64 {
        self.n_added
    }

    fn probes(&self, bytes: &[u8]) -> impl Iterator<Item = u64> {
        let h1 = xxh64(bytes, 0);
        let h2 = xxh64(bytes, 1);
        let m = self.m;
        (0..self.k as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % m)
    }

    pub fn add(&mut self, key: &PathKey) {
        self.add_bytes(key.as_bytes());
    }

    pub fn add_bytes(&mut self, bytes: &[u8]) {
        let probes: Vec<u64> = self.probes(bytes).collect();
        for bit in probes {
            self.bits[(bit / 8) as usize] |= 1 << (bit % 8);
        }
        self.n_added += 1;
    }

    pub fn query(&self, key: &PathKey) -> bool {
        self.query_bytes(key.as_bytes())
    }

    pub fn query_bytes(&self, bytes: &[u8]) -> bool {
        self.probes(bytes)
            .all(|bit| self.bits[(bit / 8) as usize] & (1 << (bit % 8)) != 0)
    }

    /// `m:u64 k:u8 bits[ceil(m/8)]`
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.m.to_le_bytes());
        out.push(self.k);
        out.extend_from_slice(&self.bits);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.bits.len());
        self.encode_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let f = Self::decode_from(&mut r)?;
        if r.remaining() != 0 {
            return Err(Error::CorruptValue("trailing bytes after bloom filter"));
        }
        Ok(f)
    }

    pub(crate) fn decode_from(r: &mut Reader<'_>) -> Result<Self> {
        let m = r.u64()?;
        let k = r.u8()?;
        if m == 0 || k == 0 {
            return Err(Error::CorruptValue("bloom filter with zero bits or probes"));
        }
        let nbytes = usize::try_from(m.div_ceil(8))
            .map_err(|_| Error::CorruptValue("bloom filter too large"))?;
        let bits = r.take(nbytes)?.to_vec();
        Ok(BloomFilter {
            bits,
            m,
            k,
            n_added: 0,
        })
    }
}

/// `(1 - e^(-k n / m))^k`
pub fn theoretical_fpr(n: u64, m: u64, k: u8) -> f64 {
    let k = k as f64;
    (1.0 - (-k * n as f64 / m as f64).exp()).powf(k)
}
