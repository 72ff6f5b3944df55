//! 8-bit frames and the builtin predictive frame codec.
//!
//! Samples are quantized with step `q = max(1, round(2^(qp/6)))`. Each plane
//! is coded as a difference against a reference plane of levels (none,
//! the previous exposure of the same view, or the same exposure of the left
//! view), and the difference is predicted with the median edge detector.
//! A mode byte per plane records the reference with the smallest absolute
//! residual sum. Residuals go through zigzag, varint and the entropy stage.

use super::entropy::{entropy_decode, entropy_encode, EntropyTag};
use super::varint::{write_svarint, Reader};
use crate::{Error, Result};

/// 8-bit planes of a multi-view, multi-exposure sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSet {
    pub width: usize,
    pub height: usize,
    pub views: usize,
    pub exposures: usize,
    /// `planes[(view * exposures + exposure) * 3 + channel]`, row-major.
    pub planes: Vec<Vec<u8>>,
}

impl FrameSet {
    pub fn new(width: usize, height: usize, views: usize, exposures: usize, planes: Vec<Vec<u8>>) -> Result<Self> {
        if planes.len() != views * exposures * 3 {
            return Err(Error::arg(format!("{} planes for {views} views x {exposures} exposures", planes.len())));
        }
        if let Some(p) = planes.iter().find(|p| p.len() != width * height) {
            return Err(Error::shape(None, format!("plane of {} samples, frame is {width}x{height}", p.len())));
        }
        Ok(Self { width, height, views, exposures, planes })
    }

    pub fn plane(&self, view: usize, exposure: usize, channel: usize) -> &[u8] {
        &self.planes[(view * self.exposures + exposure) * 3 + channel]
    }
}

/// Quantizer step of the builtin codec.
pub fn frame_step(qp: u8) -> i32 {
    (2f64.powf(f64::from(qp) / 6.0).round() as i32).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Reference {
    Intra = 0,
    PrevExposure = 1,
    LeftView = 2,
}

impl Reference {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Reference::Intra),
            1 => Ok(Reference::PrevExposure),
            2 => Ok(Reference::LeftView),
            other => Err(Error::Corrupt(format!("unknown frame reference mode {other}"))),
        }
    }
}

fn med(a: i32, b: i32, c: i32) -> i32 {
    if c >= a.max(b) {
        a.min(b)
    } else if c <= a.min(b) {
        a.max(b)
    } else {
        a + b - c
    }
}

/// Prediction of sample `(x, y)` from already decoded neighbours of `d`.
fn predict(d: &[i32], w: usize, x: usize, y: usize) -> i32 {
    let i = y * w + x;
    match (x, y) {
        (0, 0) => 0,
        (_, 0) => d[i - 1],
        (0, _) => d[i - w],
        _ => med(d[i - 1], d[i - w], d[i - w - 1]),
    }
}

fn residuals(d: &[i32], w: usize, h: usize) -> Vec<i32> {
    let mut out = Vec::with_capacity(d.len());
    for y in 0..h {
        for x in 0..w {
            out.push(d[y * w + x] - predict(d, w, x, y));
        }
    }
    out
}

fn reconstruct(res: &[i32], w: usize, h: usize) -> Vec<i32> {
    let mut d = vec![0; res.len()];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            d[i] = res[i] + predict(&d, w, x, y);
        }
    }
    d
}

fn candidates(views: usize, v: usize, e: usize) -> Vec<Reference> {
    let mut c = vec![Reference::Intra];
    if e > 0 {
        c.push(Reference::PrevExposure);
    }
    if v > 0 && views > 1 {
        c.push(Reference::LeftView);
    }
    c
}

fn reference_index(r: Reference, exposures: usize, v: usize, e: usize, ch: usize) -> Option<usize> {
    match r {
        Reference::Intra => None,
        Reference::PrevExposure => Some((v * exposures + e - 1) * 3 + ch),
        Reference::LeftView => Some(e * 3 + ch),
    }
}

/// Encode `frames` at `qp`; the entropy stage runs over the whole residual stream.
pub fn builtin_encode(frames: &FrameSet, qp: u8, entropy: EntropyTag) -> Result<Vec<u8>> {
    super::quant::check_qp(qp)?;
    let q = frame_step(qp);
    let (w, h) = (frames.width, frames.height);
    let levels: Vec<Vec<i32>> = frames
        .planes
        .iter()
        .map(|p| p.iter().map(|&s| (f64::from(s) / f64::from(q)).round() as i32).collect())
        .collect();
    let mut raw = Vec::new();
    for v in 0..frames.views {
        for e in 0..frames.exposures {
            for ch in 0..3 {
                let cur = &levels[(v * frames.exposures + e) * 3 + ch];
                let best = candidates(frames.views, v, e)
                    .into_iter()
                    .map(|r| {
                        let diff: Vec<i32> = match reference_index(r, frames.exposures, v, e, ch) {
                            None => cur.clone(),
                            Some(k) => cur.iter().zip(&levels[k]).map(|(a, b)| a - b).collect(),
                        };
                        let res = residuals(&diff, w, h);
                        let cost: i64 = res.iter().map(|&r| i64::from(r.abs())).sum();
                        (cost, r, res)
                    })
                    .min_by_key(|(cost, r, _)| (*cost, *r as u8))
                    .expect("intra is always a candidate");
                raw.push(best.1 as u8);
                for r in best.2 {
                    write_svarint(&mut raw, i64::from(r));
                }
            }
        }
    }
    entropy_encode(&raw, entropy)
}

/// Inverse of [`builtin_encode`] for a sequence of the given shape.
pub fn builtin_decode(
    bytes: &[u8],
    shape: (usize, usize, usize, usize),
    qp: u8,
    entropy: EntropyTag,
) -> Result<FrameSet> {
    super::quant::check_qp(qp)?;
    let (width, height, views, exposures) = shape;
    let q = frame_step(qp);
    let raw = entropy_decode(bytes, entropy)?;
    let mut r = Reader::new(&raw);
    let n = width * height;
    let mut levels: Vec<Vec<i32>> = Vec::with_capacity(views * exposures * 3);
    for v in 0..views {
        for e in 0..exposures {
            for ch in 0..3 {
                let mode = Reference::from_byte(r.u8()?)?;
                if !candidates(views, v, e).contains(&mode) {
                    return Err(Error::Corrupt(format!("reference mode {mode:?} invalid for view {v}, exposure {e}")));
                }
                let res = (0..n)
                    .map(|_| {
                        i32::try_from(r.svarint()?).map_err(|_| Error::Corrupt("residual out of range".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut d = reconstruct(&res, width, height);
                if let Some(k) = reference_index(mode, exposures, v, e, ch) {
                    d.iter_mut().zip(&levels[k]).for_each(|(a, b)| *a += b);
                }
                levels.push(d);
            }
        }
    }
    if r.remaining() != 0 {
        return Err(Error::Corrupt(format!("{} trailing bytes in frame payload", r.remaining())));
    }
    let planes = levels
        .into_iter()
        .map(|p| p.into_iter().map(|l| (l * q).clamp(0, 255) as u8).collect())
        .collect();
    FrameSet::new(width, height, views, exposures, planes)
}
