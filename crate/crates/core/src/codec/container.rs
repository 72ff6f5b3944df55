//! Self-describing stream container.
//!
//! Layout, little-endian:
//!
//! | bytes | field |
//! |------:|-------|
//! | 4 | magic `TMC1` |
//! | 1 | version (1) |
//! | 1 | path tag (0 latent, 1 frames) |
//! | 1 | colour space tag |
//! | 1 | views |
//! | 1 | exposures |
//! | 2 | height |
//! | 2 | width |
//! | 1 | tensor order (4) |
//! | 8 | ranks, `u16` per mode |
//! | 1 | qp |
//! | 1 | entropy stage tag |
//! | 1 | layout id (1 = H, W, E, V) |
//! | 6 | reserved, zero |
//!
//! The header is followed by blocks, each a `u32` length and its bytes.

use super::entropy::EntropyTag;
use super::varint::Reader;
use crate::color::ColorSpace;
use crate::scene::LAYOUT_HWEV;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TMC1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 31;
pub const ORDER: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathTag {
    /// Quantized core and factors are transmitted.
    Latent,
    /// Low-rank reconstructions are coded as 8-bit frames.
    Frames,
}

impl PathTag {
    pub fn tag(self) -> u8 {
        match self {
            PathTag::Latent => 0,
            PathTag::Frames => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(PathTag::Latent),
            1 => Ok(PathTag::Frames),
            other => Err(Error::Corrupt(format!("unknown path tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PathTag::Latent => "latent",
            PathTag::Frames => "frames",
        }
    }
}

impl std::str::FromStr for PathTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "latent" => Ok(PathTag::Latent),
            "frames" => Ok(PathTag::Frames),
            other => Err(Error::arg(format!("unknown path `{other}`"))),
        }
    }
}

impl std::fmt::Display for PathTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub path: PathTag,
    pub space: ColorSpace,
    pub views: u8,
    pub exposures: u8,
    pub height: u16,
    pub width: u16,
    pub ranks: [u16; 4],
    pub qp: u8,
    pub entropy: EntropyTag,
}

impl Header {
    pub fn dims(&self) -> [usize; 4] {
        [self.height.into(), self.width.into(), self.exposures.into(), self.views.into()]
    }

    pub fn ranks(&self) -> [usize; 4] {
        self.ranks.map(usize::from)
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.path.tag());
        out.push(self.space.tag());
        out.push(self.views);
        out.push(self.exposures);
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.push(ORDER);
        for r in self.ranks {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out.push(self.qp);
        out.push(self.entropy.tag());
        out.push(LAYOUT_HWEV);
        out.extend_from_slice(&[0; 6]);
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        if r.remaining() < HEADER_LEN {
            return Err(Error::Corrupt(format!("stream of {} bytes is shorter than the header", r.remaining())));
        }
        if r.take(4)? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let path = PathTag::from_tag(r.u8()?)?;
        let space = ColorSpace::from_tag(r.u8()?).map_err(|e| Error::Corrupt(e.to_string()))?;
        let views = r.u8()?;
        let exposures = r.u8()?;
        let height = r.u16()?;
        let width = r.u16()?;
        let order = r.u8()?;
        if order != ORDER {
            return Err(Error::Corrupt(format!("tensor order {order}, expected {ORDER}")));
        }
        let mut ranks = [0u16; 4];
        for rank in ranks.iter_mut() {
            *rank = r.u16()?;
        }
        let qp = r.u8()?;
        let entropy = EntropyTag::from_tag(r.u8()?)?;
        let layout = r.u8()?;
        if layout != LAYOUT_HWEV {
            return Err(Error::Corrupt(format!("unknown tensor layout {layout}")));
        }
        r.take(6)?;
        let h = Header { path, space, views, exposures, height, width, ranks, qp, entropy };
        if h.dims().contains(&0) {
            return Err(Error::Corrupt(format!("empty dimension in {:?}", h.dims())));
        }
        if h.ranks().iter().zip(h.dims()).any(|(&r, d)| r == 0 || r > d) {
            return Err(Error::Corrupt(format!("ranks {:?} invalid for dims {:?}", h.ranks(), h.dims())));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedStream {
    pub header: Header,
    pub blocks: Vec<Vec<u8>>,
}

impl CompressedStream {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.blocks.iter().map(|b| b.len() + 4).sum::<usize>());
        self.header.write(&mut out);
        for b in &self.blocks {
            let len = u32::try_from(b.len()).map_err(|_| Error::arg("block exceeds 4 GiB"))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(b);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let header = Header::read(&mut r)?;
        let mut blocks = Vec::new();
        while r.remaining() > 0 {
            let len = r.u32()? as usize;
            blocks.push(r.take(len)?.to_vec());
        }
        Ok(Self { header, blocks })
    }

    /// Bytes spent on the header and block length prefixes.
    pub fn overhead_bytes(&self) -> usize {
        HEADER_LEN + 4 * self.blocks.len()
    }
}
