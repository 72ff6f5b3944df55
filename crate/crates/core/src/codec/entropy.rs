//! Byte-level entropy stage: stored, or an order-0 adaptive range coder.
//!
//! Both modes emit a little-endian `u32` holding the input length followed by
//! the payload. The range coder keeps a 32-bit range with carry propagation
//! through a pending-byte cache, and adaptive counts that start at 1 and grow
//! by [`INCREMENT`]; when the total reaches [`MAX_TOTAL`] every count is
//! halved, rounding up.

use super::varint::Reader;
use crate::{Error, Result};

pub const INCREMENT: u32 = 32;
pub const MAX_TOTAL: u32 = 1 << 16;
const TOP: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntropyTag {
    Stored,
    Range,
}

impl EntropyTag {
    pub fn tag(self) -> u8 {
        match self {
            EntropyTag::Stored => 0,
            EntropyTag::Range => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(EntropyTag::Stored),
            1 => Ok(EntropyTag::Range),
            other => Err(Error::UnknownEntropyTag(other)),
        }
    }
}

#[derive(Debug, Clone)]
struct Model {
    counts: [u32; 256],
    total: u32,
}

impl Model {
    fn new() -> Self {
        Self { counts: [1; 256], total: 256 }
    }

    fn cum(&self, sym: u8) -> u32 {
        self.counts[..sym as usize].iter().sum()
    }

    /// Symbol whose interval contains `target`, with its cumulative start.
    fn find(&self, target: u32) -> (u8, u32) {
        let mut cum = 0;
        for (s, &c) in self.counts.iter().enumerate() {
            if target < cum + c {
                return (s as u8, cum);
            }
            cum += c;
        }
        unreachable!("target below total")
    }

    fn update(&mut self, sym: u8) {
        self.counts[sym as usize] += INCREMENT;
        self.total += INCREMENT;
        if self.total >= MAX_TOTAL {
            self.total = 0;
            for c in self.counts.iter_mut() {
                *c = c.div_ceil(2);
                self.total += *c;
            }
        }
    }
}

struct Encoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Encoder {
    fn new(out: Vec<u8>) -> Self {
        Self { low: 0, range: u32::MAX, cache: 0, cache_size: 1, out }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.out.push(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        let r = self.range / total;
        self.low += u64::from(r) * u64::from(cum);
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

struct Decoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(input: &'a [u8]) -> Result<Self> {
        if input.len() < 5 {
            return Err(Error::Corrupt("range-coded payload shorter than 5 bytes".into()));
        }
        let mut d = Self { code: 0, range: u32::MAX, input, pos: 0 };
        for _ in 0..5 {
            d.code = (d.code << 8) | u32::from(d.next_byte());
        }
        Ok(d)
    }

    // Reading past the end yields zeros, matching the encoder's flush.
    fn next_byte(&mut self) -> u8 {
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    fn decode(&mut self, model: &Model) -> Result<u8> {
        let r = self.range / model.total;
        let target = (self.code / r).min(model.total - 1);
        let (sym, cum) = model.find(target);
        self.code = self
            .code
            .checked_sub(r * cum)
            .ok_or_else(|| Error::Corrupt("range coder state out of bounds".into()))?;
        self.range = r * model.counts[sym as usize];
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | u32::from(self.next_byte());
        }
        Ok(sym)
    }
}

fn range_encode(data: &[u8], out: Vec<u8>) -> Vec<u8> {
    let mut model = Model::new();
    let mut enc = Encoder::new(out);
    for &b in data {
        enc.encode(model.cum(b), model.counts[b as usize], model.total);
        model.update(b);
    }
    enc.finish()
}

fn range_decode(payload: &[u8], len: usize) -> Result<Vec<u8>> {
    let mut model = Model::new();
    let mut dec = Decoder::new(payload)?;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let s = dec.decode(&model)?;
        model.update(s);
        out.push(s);
    }
    Ok(out)
}

/// Length marker plus the coded payload.
pub fn entropy_encode(data: &[u8], tag: EntropyTag) -> Result<Vec<u8>> {
    let len = u32::try_from(data.len()).map_err(|_| Error::arg("entropy stage input exceeds 4 GiB"))?;
    let mut out = len.to_le_bytes().to_vec();
    match tag {
        EntropyTag::Stored => out.extend_from_slice(data),
        EntropyTag::Range if data.is_empty() => {}
        EntropyTag::Range => out = range_encode(data, out),
    }
    Ok(out)
}

pub fn entropy_decode(bytes: &[u8], tag: EntropyTag) -> Result<Vec<u8>> {
    let mut r = Reader::new(bytes);
    let len = r.u32()? as usize;
    let payload = r.take(r.remaining())?;
    match tag {
        EntropyTag::Stored => {
            if payload.len() != len {
                return Err(Error::Corrupt(format!("stored block of {} bytes, marker says {len}", payload.len())));
            }
            Ok(payload.to_vec())
        }
        EntropyTag::Range if len == 0 => Ok(Vec::new()),
        EntropyTag::Range => range_decode(payload, len),
    }
}
