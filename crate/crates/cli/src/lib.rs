//! Command-line front end: single-scene compress/decompress, rank × QP
//! sweeps with resumable CSV output, and RD report merging.

pub mod rdcsv;
pub mod report;
pub mod sweep;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mescode_core::codec::{
    self, decode_stream, encode_stream, rank_preset, Backend, DecodeOptions, EncodeConfig, ExternalConfig, PathTag,
    SolveOptions,
};
use mescode_core::color::ColorSpace;
use mescode_core::metrics::{scene_psnr, PsnrDomain};
use mescode_core::scene::{load_scene, synthetic_scene, write_scene, ImageFormat, SceneStack};

use rdcsv::RdRow;

/// Invalid invocation; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "mescode", version, about = "Tucker-based coding of multi-exposure stereo image stacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode one scene directory into a stream and report its rate and PSNR.
    Compress(CompressArgs),
    /// Decode a stream into a scene directory.
    Decompress(DecompressArgs),
    /// Run a colour space × rank preset × QP grid and write rd.csv.
    Sweep(SweepArgs),
    /// Merge rd.csv files and print bitrate-sorted series.
    Report(ReportArgs),
    /// Write a synthetic bracketed stereo scene.
    GenScene(GenSceneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Rgb,
    Ycbcr,
    Ipt,
}

impl From<SpaceArg> for ColorSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Rgb => ColorSpace::Rgb,
            SpaceArg::Ycbcr => ColorSpace::YCbCr,
            SpaceArg::Ipt => ColorSpace::Ipt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Latent,
    Frames,
}

impl From<PathArg> for PathTag {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Latent => PathTag::Latent,
            PathArg::Frames => PathTag::Frames,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Png,
    Ppm,
}

impl From<FormatArg> for ImageFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Png => ImageFormat::Png,
            FormatArg::Ppm => ImageFormat::Ppm,
        }
    }
}

/// Frame backend and solver flags shared by `compress` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct CodingArgs {
    /// Frame backend: `builtin`, or `cmd:<template>` with {in}, {out}, {qp}.
    #[arg(long, default_value = "builtin")]
    pub backend: String,
    /// Decode command template for an external backend.
    #[arg(long)]
    pub backend_decode: Option<String>,
    /// Directory for backend temporary files.
    #[arg(long)]
    pub scratch: Option<PathBuf>,
    /// Backend timeout in seconds.
    #[arg(long, default_value_t = 600)]
    pub timeout: u64,
    /// Solver seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum ALS sweeps; 0 keeps the truncated HOSVD.
    #[arg(long, default_value_t = 50)]
    pub max_sweeps: usize,
    /// Disable pairwise-perturbation sweeps.
    #[arg(long)]
    pub no_pp: bool,
}

impl CodingArgs {
    pub fn backend(&self) -> Result<Backend> {
        let external = |template: &str| ExternalConfig {
            encode_template: template.to_string(),
            decode_template: self.backend_decode.clone(),
            timeout: Duration::from_secs(self.timeout),
            scratch_dir: self.scratch.clone(),
        };
        match self.backend.as_str() {
            "builtin" => Ok(Backend::Builtin),
            s => match s.strip_prefix("cmd:") {
                Some(t) if !t.trim().is_empty() => Ok(Backend::External(external(t))),
                _ => Err(usage(format!("--backend must be `builtin` or `cmd:<template>`, got `{s}`"))),
            },
        }
    }

    pub fn solve(&self) -> SolveOptions {
        SolveOptions {
            max_sweeps: self.max_sweeps,
            pairwise_perturbation: !self.no_pp,
            seed: self.seed,
            ..SolveOptions::default()
        }
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            external: Some(ExternalConfig {
                encode_template: String::new(),
                decode_template: self.backend_decode.clone(),
                timeout: Duration::from_secs(self.timeout),
                scratch_dir: self.scratch.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    /// Scene directory with {left,right}_{e}.{png,ppm}.
    #[arg(long)]
    pub scene: PathBuf,
    /// Output stream file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "ipt")]
    pub space: SpaceArg,
    /// Rank preset 1..5, or four comma-separated ranks (H,W,E,V).
    #[arg(long, default_value = "3")]
    pub ranks: String,
    #[arg(long, visible_alias = "qps", default_value_t = 10)]
    pub qp: u8,
    #[arg(long, value_enum, default_value = "latent")]
    pub path: PathArg,
    #[command(flatten)]
    pub coding: CodingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DecompressArgs {
    /// Stream produced by `compress`.
    #[arg(long, visible_alias = "in")]
    pub input: PathBuf,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "png")]
    pub format: FormatArg,
    /// Decode command template for an external backend.
    #[arg(long)]
    pub backend_decode: Option<String>,
    #[arg(long)]
    pub scratch: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    pub timeout: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Output directory for rd.csv and rd_<space>.dat.
    #[arg(long)]
    pub out: PathBuf,
    /// Colour spaces to sweep.
    #[arg(long = "space", visible_alias = "spaces", value_enum, value_delimiter = ',', default_value = "ycbcr,ipt")]
    pub spaces: Vec<SpaceArg>,
    /// Rank presets to sweep.
    #[arg(long = "ranks", visible_alias = "presets", value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub presets: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    pub qps: Vec<u8>,
    #[arg(long, value_enum, default_value = "latent")]
    pub path: PathArg,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub coding: CodingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// rd.csv files to merge.
    #[arg(required = true)]
    pub csv: Vec<PathBuf>,
    /// Write the series here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the merged, deduplicated rows as an rd.csv.
    #[arg(long)]
    pub merged: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenSceneArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 144)]
    pub height: usize,
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    #[arg(long, default_value_t = 5)]
    pub exposures: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "png")]
    pub format: FormatArg,
}

/// Scene-relative rank specification: a preset number or explicit ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSpec {
    Preset(usize),
    Explicit([usize; 4]),
}

impl RankSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| usage(format!("--ranks expects a preset or four integers, got `{s}`")))?;
        match parts.as_slice() {
            [k] => Ok(RankSpec::Preset(*k)),
            [a, b, c, d] => Ok(RankSpec::Explicit([*a, *b, *c, *d])),
            _ => Err(usage(format!("--ranks expects a preset or four integers, got `{s}`"))),
        }
    }

    pub fn resolve(self, dims: [usize; 4]) -> Result<[usize; 4]> {
        match self {
            RankSpec::Preset(k) => rank_preset(k, dims).map_err(|e| usage(e.to_string())),
            RankSpec::Explicit(r) => {
                if r.iter().zip(dims).any(|(&r, d)| r == 0 || r > d) {
                    return Err(usage(format!("ranks {r:?} must lie in 1..=dims {dims:?}")));
                }
                Ok(r)
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            RankSpec::Preset(k) => k.to_string(),
            RankSpec::Explicit(r) => format!("{}x{}x{}x{}", r[0], r[1], r[2], r[3]),
        }
    }
}

pub fn check_scene_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        return Err(usage(format!("scene directory {} does not exist", dir.display())));
    }
    Ok(())
}

pub fn check_qp(qp: u8) -> Result<()> {
    codec::quant::check_qp(qp).map_err(|e| usage(e.to_string()))
}

pub fn scene_dims(s: &SceneStack) -> [usize; 4] {
    s.meta().tensor_dims()
}

fn write_row_stdout(row: &RdRow) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(std::io::stdout());
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_compress(a: &CompressArgs) -> Result<()> {
    check_scene_dir(&a.scene)?;
    check_qp(a.qp)?;
    let spec = RankSpec::parse(&a.ranks)?;
    let backend = a.coding.backend()?;
    let scene = load_scene(&a.scene).with_context(|| format!("loading {}", a.scene.display()))?;
    let ranks = spec.resolve(scene_dims(&scene))?;
    let cfg = EncodeConfig {
        path: a.path.into(),
        backend: backend.clone(),
        solve: a.coding.solve(),
        ..EncodeConfig::new(ranks, a.qp, a.space.into())
    };
    let enc = encode_stream(&scene, &cfg)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&a.out, &enc.bytes).with_context(|| format!("writing {}", a.out.display()))?;
    let dec = decode_stream(&enc.bytes, &a.coding.decode_options())?;
    let p = scene_psnr(&scene, &dec.scene, PsnrDomain::Rgb)?;
    let space: ColorSpace = a.space.into();
    let path: PathTag = a.path.into();
    let label = spec.label();
    let row = RdRow {
        scene: scene.name().to_string(),
        space: space.name().into(),
        preset: label.clone(),
        qp: a.qp,
        path: path.name().into(),
        bits_latent: Some(enc.bits.latent),
        bits_backend: Some(enc.bits.backend),
        bits_total: Some(enc.bits.total),
        psnr_left: p.per_view.first().copied(),
        psnr_right: p.per_view.get(1).copied(),
        error: String::new(),
        cell_id: rdcsv::cell_id(scene.name(), space.name(), &label, a.qp, path.name(), backend.kind()),
    };
    write_row_stdout(&row)
}

pub fn cmd_decompress(a: &DecompressArgs) -> Result<()> {
    let bytes = std::fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let opts = DecodeOptions {
        external: Some(ExternalConfig {
            encode_template: String::new(),
            decode_template: a.backend_decode.clone(),
            timeout: Duration::from_secs(a.timeout),
            scratch_dir: a.scratch.clone(),
        }),
    };
    let dec = decode_stream(&bytes, &opts)?;
    let written = write_scene(&dec.scene, &a.out, a.format.into())?;
    eprintln!("wrote {} images to {}", written.len(), a.out.display());
    if dec.clamped > 0 {
        eprintln!("{} samples clamped into [0, 1]", dec.clamped);
    }
    Ok(())
}

pub fn cmd_gen_scene(a: &GenSceneArgs) -> Result<()> {
    let s = synthetic_scene(a.width, a.height, a.views, a.exposures, a.seed).map_err(|e| usage(e.to_string()))?;
    let written = write_scene(&s, &a.out, a.format.into())?;
    eprintln!("wrote {} images to {}", written.len(), a.out.display());
    Ok(())
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Compress(a) => cmd_compress(a),
        Command::Decompress(a) => cmd_decompress(a),
        Command::Sweep(a) => sweep::cmd_sweep(a),
        Command::Report(a) => report::cmd_report(a),
        Command::GenScene(a) => cmd_gen_scene(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
