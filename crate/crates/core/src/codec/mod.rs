//! Scene coding: Tucker analysis per colour channel, then either the
//! quantized latent or the low-rank frames are written into a
//! [`CompressedStream`].
//!
//! Latent streams carry one block per channel: the entropy-coded bytes of the
//! quantizer step (`f64`), every factor as `f32` in mode order, and the core
//! levels as zigzag varints. Frame streams carry a preamble block naming the
//! backend and its command lines, then the backend payload.

pub mod container;
pub mod entropy;
pub mod external;
pub mod frames;
pub mod quant;
pub mod varint;

use rayon::prelude::*;

pub use container::{CompressedStream, Header, PathTag};
pub use entropy::{entropy_decode, entropy_encode, EntropyTag};
pub use external::ExternalConfig;
pub use frames::{builtin_decode, builtin_encode, FrameSet};
pub use quant::{dequantize, quantize_core, QuantizedModel};

use crate::color::{ColorImage, ColorSpace};
use crate::scene::{stack_to_tensor, tensor_to_stack, to_u8, SceneMeta, SceneStack};
use crate::tucker::{tucker_als, SolveConfig, TuckerModel};
use crate::{Error, Result};
use varint::{write_svarint, Reader};

/// Mapping from a rank preset `k` to multilinear ranks: spatial modes get
/// `ceil(k · dim · spatial_density / steps)`, exposure and view modes get
/// `min(k, dim)`; every rank is clamped to `1..=dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPresets {
    pub spatial_density: f64,
    pub steps: usize,
}

impl Default for RankPresets {
    fn default() -> Self {
        Self { spatial_density: 0.25, steps: 5 }
    }
}

impl RankPresets {
    pub fn ranks(&self, k: usize, dims: [usize; 4]) -> Result<[usize; 4]> {
        if k == 0 || k > self.steps {
            return Err(Error::arg(format!("rank preset {k} outside 1..={}", self.steps)));
        }
        let spatial = |d: usize| ((k * d) as f64 * self.spatial_density / self.steps as f64).ceil() as usize;
        let raw = [spatial(dims[0]), spatial(dims[1]), k, k];
        Ok([0, 1, 2, 3].map(|i| raw[i].clamp(1, dims[i].max(1))))
    }
}

/// Ranks for preset `k` under the default table.
pub fn rank_preset(k: usize, dims: [usize; 4]) -> Result<[usize; 4]> {
    RankPresets::default().ranks(k, dims)
}

/// Frame coder used on the frames path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Builtin,
    External(ExternalConfig),
}

impl Backend {
    pub fn kind(&self) -> &'static str {
        match self {
            Backend::Builtin => "builtin",
            Backend::External(_) => "external",
        }
    }
}

/// Solver settings shared by every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// 0 keeps the truncated-HOSVD initialization.
    pub max_sweeps: usize,
    pub fit_tol: f64,
    pub pairwise_perturbation: bool,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_sweeps: 50, fit_tol: 1e-5, pairwise_perturbation: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub ranks: [usize; 4],
    pub qp: u8,
    pub path: PathTag,
    pub space: ColorSpace,
    pub entropy: EntropyTag,
    pub backend: Backend,
    pub solve: SolveOptions,
}

impl EncodeConfig {
    pub fn new(ranks: [usize; 4], qp: u8, space: ColorSpace) -> Self {
        Self {
            ranks,
            qp,
            path: PathTag::Latent,
            space,
            entropy: EntropyTag::Range,
            backend: Backend::Builtin,
            solve: SolveOptions::default(),
        }
    }
}

/// Per-channel Tucker models of a scene in its coding space.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub meta: SceneMeta,
    pub models: Vec<TuckerModel<f64>>,
    pub fits: Vec<f64>,
    pub sweeps: Vec<usize>,
}

impl Analysis {
    pub fn ranks(&self) -> [usize; 4] {
        let r = self.models[0].ranks();
        [r[0], r[1], r[2], r[3]]
    }
}

/// Convert an RGB scene to `space` and fit a Tucker model per channel.
pub fn analyze(scene: &SceneStack, space: ColorSpace, ranks: [usize; 4], solve: &SolveOptions) -> Result<Analysis> {
    if scene.space() != ColorSpace::Rgb {
        return Err(Error::arg(format!("scenes are encoded from RGB, got {}", scene.space())));
    }
    let coded = scene.to_space(space)?;
    let cfg = SolveConfig {
        max_sweeps: solve.max_sweeps,
        fit_tol: solve.fit_tol,
        pairwise_perturbation: solve.pairwise_perturbation,
        seed: solve.seed,
        ..SolveConfig::new(ranks.to_vec())
    };
    let outcomes = (0..3)
        .into_par_iter()
        .map(|c| tucker_als(&stack_to_tensor(&coded, c)?, &cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis {
        meta: coded.meta().clone(),
        fits: outcomes.iter().map(|o| o.fit).collect(),
        sweeps: outcomes.iter().map(|o| o.trace.sweeps()).collect(),
        models: outcomes.into_iter().map(|o| o.model).collect(),
    })
}

/// Bit counts of one encoded stream. `total` also covers the header, block
/// length prefixes and any preamble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitBreakdown {
    pub latent: u64,
    pub backend: u64,
    pub total: u64,
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub stream: CompressedStream,
    pub bytes: Vec<u8>,
    pub bits: BitBreakdown,
    pub backend_command: Option<String>,
}

fn header_for(meta: &SceneMeta, ranks: [usize; 4], qp: u8, path: PathTag, entropy: EntropyTag) -> Result<Header> {
    let u16_of = |v: usize, what: &str| u16::try_from(v).map_err(|_| Error::arg(format!("{what} {v} exceeds 65535")));
    let u8_of = |v: usize, what: &str| u8::try_from(v).map_err(|_| Error::arg(format!("{what} {v} exceeds 255")));
    Ok(Header {
        path,
        space: meta.space,
        views: u8_of(meta.views, "view count")?,
        exposures: u8_of(meta.exposures, "exposure count")?,
        height: u16_of(meta.height, "height")?,
        width: u16_of(meta.width, "width")?,
        ranks: [
            u16_of(ranks[0], "rank")?,
            u16_of(ranks[1], "rank")?,
            u16_of(ranks[2], "rank")?,
            u16_of(ranks[3], "rank")?,
        ],
        qp,
        entropy,
    })
}

fn latent_block(q: &QuantizedModel) -> Vec<u8> {
    let mut raw = q.step.to_le_bytes().to_vec();
    for f in &q.factors {
        for v in f {
            raw.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &l in &q.levels {
        write_svarint(&mut raw, l);
    }
    raw
}

fn parse_latent_block(raw: &[u8], header: &Header) -> Result<QuantizedModel> {
    let dims = header.dims();
    let ranks = header.ranks();
    let mut r = Reader::new(raw);
    let step = r.f64()?;
    let factors = (0..4)
        .map(|m| (0..dims[m] * ranks[m]).map(|_| r.f32()).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let levels = (0..ranks.iter().product::<usize>()).map(|_| r.svarint()).collect::<Result<Vec<_>>>()?;
    if r.remaining() != 0 {
        return Err(Error::Corrupt(format!("{} trailing bytes in latent block", r.remaining())));
    }
    Ok(QuantizedModel { ranks: ranks.to_vec(), source_dims: dims.to_vec(), factors, levels, step, qp: header.qp })
}

/// Coded-space scene as 8-bit frames, clamping out-of-range samples.
pub fn scene_to_frames(s: &SceneStack) -> Result<FrameSet> {
    let planes = s
        .images()
        .iter()
        .flat_map(|img| img.planes().iter().map(|p| p.iter().map(|&v| to_u8(v)).collect()))
        .collect();
    FrameSet::new(s.width(), s.height(), s.views(), s.exposures(), planes)
}

pub fn frames_to_scene(f: &FrameSet, meta: &SceneMeta) -> Result<SceneStack> {
    if (f.width, f.height, f.views, f.exposures) != (meta.width, meta.height, meta.views, meta.exposures) {
        return Err(Error::Corrupt("decoded frames do not match the stream header".into()));
    }
    let images = (0..f.views)
        .map(|v| {
            (0..f.exposures)
                .map(|e| {
                    let planes = [0, 1, 2].map(|c| f.plane(v, e, c).iter().map(|&s| f64::from(s) / 255.0).collect());
                    ColorImage::new(f.width, f.height, planes, meta.space)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SceneStack::new(meta.name.clone(), images)
}

const BACKEND_BUILTIN: u8 = 0;
const BACKEND_EXTERNAL: u8 = 1;

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn read_str(r: &mut Reader<'_>) -> Result<String> {
    let len = r.u32()? as usize;
    String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Corrupt("preamble string is not UTF-8".into()))
}

/// Reconstruct the models of `a` and code them at `qp`.
pub fn encode_analysis(
    a: &Analysis,
    qp: u8,
    path: PathTag,
    entropy: EntropyTag,
    backend: &Backend,
) -> Result<Encoded> {
    quant::check_qp(qp)?;
    let header = header_for(&a.meta, a.ranks(), qp, path, entropy)?;
    let mut backend_command = None;
    let (blocks, latent, backend_bytes) = match path {
        PathTag::Latent => {
            let blocks = a
                .models
                .par_iter()
                .map(|m| entropy_encode(&latent_block(&quantize_core(m, qp)?), entropy))
                .collect::<Result<Vec<_>>>()?;
            let latent = blocks.iter().map(|b| b.len()).sum::<usize>();
            (blocks, latent, 0)
        }
        PathTag::Frames => {
            let channels: Vec<_> = a.models.par_iter().map(|m| m.reconstruct()).collect();
            let frames = scene_to_frames(&tensor_to_stack(&channels, &a.meta)?)?;
            let mut preamble = Vec::new();
            let payload = match backend {
                Backend::Builtin => {
                    preamble.push(BACKEND_BUILTIN);
                    push_str(&mut preamble, "");
                    push_str(&mut preamble, "");
                    builtin_encode(&frames, qp, entropy)?
                }
                Backend::External(cfg) => {
                    let out = external::external_encode(&frames, qp, cfg)?;
                    preamble.push(BACKEND_EXTERNAL);
                    push_str(&mut preamble, &out.command);
                    push_str(&mut preamble, cfg.decode_template.as_deref().unwrap_or(""));
                    backend_command = Some(out.command);
                    out.bytes
                }
            };
            let n = payload.len();
            (vec![preamble, payload], 0, n)
        }
    };
    let stream = CompressedStream { header, blocks };
    let bytes = stream.to_bytes()?;
    let bits = BitBreakdown { latent: latent as u64 * 8, backend: backend_bytes as u64 * 8, total: bytes.len() as u64 * 8 };
    Ok(Encoded { stream, bytes, bits, backend_command })
}

/// Full encode of an RGB scene.
pub fn encode_stream(scene: &SceneStack, cfg: &EncodeConfig) -> Result<Encoded> {
    quant::check_qp(cfg.qp)?;
    let a = analyze(scene, cfg.space, cfg.ranks, &cfg.solve)?;
    encode_analysis(&a, cfg.qp, cfg.path, cfg.entropy, &cfg.backend)
}

/// Decoder-side settings for external backends.
#[derive(Debug, Clone, Default)]
pub struct DecodeOptions {
    /// Scratch directory, timeout and an optional decode template that
    /// overrides the one recorded in the stream.
    pub external: Option<ExternalConfig>,
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub header: Header,
    /// Reconstruction in the coding space, before the inverse colour transform.
    pub coded: SceneStack,
    /// RGB reconstruction, clamped to `[0, 1]`.
    pub scene: SceneStack,
    pub clamped: usize,
}

pub fn decode_stream(bytes: &[u8], opts: &DecodeOptions) -> Result<Decoded> {
    let stream = CompressedStream::from_bytes(bytes)?;
    let h = &stream.header;
    quant::check_qp(h.qp).map_err(|e| Error::Corrupt(e.to_string()))?;
    let [height, width, exposures, views] = h.dims();
    let meta = SceneMeta { name: "decoded".into(), views, exposures, width, height, space: h.space };
    let coded = match h.path {
        PathTag::Latent => {
            if stream.blocks.len() != 3 {
                return Err(Error::Corrupt(format!("latent stream has {} blocks, expected 3", stream.blocks.len())));
            }
            let channels = stream
                .blocks
                .par_iter()
                .map(|b| {
                    let q = parse_latent_block(&entropy_decode(b, h.entropy)?, h)?;
                    Ok(dequantize(&q)?.reconstruct())
                })
                .collect::<Result<Vec<_>>>()?;
            tensor_to_stack(&channels, &meta)?
        }
        PathTag::Frames => {
            if stream.blocks.len() != 2 {
                return Err(Error::Corrupt(format!("frame stream has {} blocks, expected 2", stream.blocks.len())));
            }
            let mut r = Reader::new(&stream.blocks[0]);
            let kind = r.u8()?;
            let _encode_command = read_str(&mut r)?;
            let recorded_decode = read_str(&mut r)?;
            let shape = (width, height, views, exposures);
            let frames = match kind {
                BACKEND_BUILTIN => builtin_decode(&stream.blocks[1], shape, h.qp, h.entropy)?,
                BACKEND_EXTERNAL => {
                    let cfg = opts.external.clone().unwrap_or_else(|| ExternalConfig::new(""));
                    let template = cfg
                        .decode_template
                        .clone()
                        .or_else(|| (!recorded_decode.is_empty()).then_some(recorded_decode));
                    external::external_decode(&stream.blocks[1], shape, h.qp, template.as_deref(), &cfg)?
                }
                other => return Err(Error::Corrupt(format!("unknown backend kind {other}"))),
            };
            frames_to_scene(&frames, &meta)?
        }
    };
    let (scene, clamped) = coded.to_rgb()?;
    Ok(Decoded { header: stream.header, coded, scene, clamped })
}

/// Encoder command recorded in a frames-path stream, if any.
pub fn recorded_command(stream: &CompressedStream) -> Result<Option<String>> {
    if stream.header.path != PathTag::Frames || stream.blocks.is_empty() {
        return Ok(None);
    }
    let mut r = Reader::new(&stream.blocks[0]);
    r.u8()?;
    let cmd = read_str(&mut r)?;
    Ok((!cmd.is_empty()).then_some(cmd))
}
