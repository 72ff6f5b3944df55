//! Adapter for an external video encoder driven through a shell command.
//!
//! Frames are written as raw 8-bit I420: for each view, then each exposure,
//! a full-resolution plane of channel 0 followed by channels 1 and 2
//! averaged over 2×2 blocks (odd edges use the available samples). The
//! command template may reference `{in}`, `{out}` and `{qp}`; the encoder
//! reads `{in}` and writes its bitstream to `{out}`.
//!
//! Decoding runs an optional decode template the same way, with `{in}` the
//! bitstream and `{out}` the I420 file to read back. Without a decode
//! template the bitstream is taken to be I420 itself.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::frames::FrameSet;
use crate::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalConfig {
    pub encode_template: String,
    pub decode_template: Option<String>,
    pub timeout: Duration,
    /// Directory for temporary files; the system default when `None`.
    pub scratch_dir: Option<PathBuf>,
}

impl ExternalConfig {
    pub fn new(encode_template: impl Into<String>) -> Self {
        Self {
            encode_template: encode_template.into(),
            decode_template: None,
            timeout: DEFAULT_TIMEOUT,
            scratch_dir: None,
        }
    }
}

/// Replace `{in}`, `{out}` and `{qp}` in a command template.
pub fn substitute(template: &str, input: &Path, output: &Path, qp: u8) -> String {
    template
        .replace("{in}", &input.display().to_string())
        .replace("{out}", &output.display().to_string())
        .replace("{qp}", &qp.to_string())
}

fn chroma_dims(w: usize, h: usize) -> (usize, usize) {
    (w.div_ceil(2), h.div_ceil(2))
}

/// Byte size of one I420 frame.
pub fn i420_frame_len(w: usize, h: usize) -> usize {
    let (cw, ch) = chroma_dims(w, h);
    w * h + 2 * cw * ch
}

fn downsample(p: &[u8], w: usize, h: usize) -> Vec<u8> {
    let (cw, ch) = chroma_dims(w, h);
    let mut out = Vec::with_capacity(cw * ch);
    for cy in 0..ch {
        for cx in 0..cw {
            let (mut sum, mut n) = (0u32, 0u32);
            for y in 2 * cy..(2 * cy + 2).min(h) {
                for x in 2 * cx..(2 * cx + 2).min(w) {
                    sum += u32::from(p[y * w + x]);
                    n += 1;
                }
            }
            out.push(((sum + n / 2) / n) as u8);
        }
    }
    out
}

fn upsample(p: &[u8], w: usize, h: usize) -> Vec<u8> {
    let (cw, _) = chroma_dims(w, h);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(p[(y / 2) * cw + x / 2]);
        }
    }
    out
}

pub fn write_i420(frames: &FrameSet) -> Vec<u8> {
    let (w, h) = (frames.width, frames.height);
    let mut out = Vec::with_capacity(frames.views * frames.exposures * i420_frame_len(w, h));
    for v in 0..frames.views {
        for e in 0..frames.exposures {
            out.extend_from_slice(frames.plane(v, e, 0));
            out.extend(downsample(frames.plane(v, e, 1), w, h));
            out.extend(downsample(frames.plane(v, e, 2), w, h));
        }
    }
    out
}

pub fn read_i420(bytes: &[u8], width: usize, height: usize, views: usize, exposures: usize) -> Result<FrameSet> {
    let frame = i420_frame_len(width, height);
    if bytes.len() != frame * views * exposures {
        return Err(Error::Corrupt(format!(
            "I420 data of {} bytes, expected {} frames of {frame}",
            bytes.len(),
            views * exposures
        )));
    }
    let (cw, ch) = chroma_dims(width, height);
    let mut planes = Vec::with_capacity(views * exposures * 3);
    for f in bytes.chunks(frame) {
        let (y, rest) = f.split_at(width * height);
        let (u, v) = rest.split_at(cw * ch);
        planes.push(y.to_vec());
        planes.push(upsample(u, width, height));
        planes.push(upsample(v, width, height));
    }
    FrameSet::new(width, height, views, exposures, planes)
}

/// Run `command` through `sh -c`, killing it after `timeout`.
pub fn run_command(command: &str, timeout: Duration, scratch: &Path) -> Result<()> {
    let backend_err = |reason: String| Error::Backend { command: command.to_string(), reason };
    let stderr_file = tempfile::NamedTempFile::new_in(scratch)?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(stderr_file.reopen()?)
        .spawn()
        .map_err(|e| backend_err(format!("spawn failed: {e}")))?;
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(backend_err(format!("timed out after {} s", timeout.as_secs_f64())));
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    if !status.success() {
        let stderr = std::fs::read_to_string(stderr_file.path()).unwrap_or_default();
        return Err(backend_err(format!("{status}: {}", stderr.trim())));
    }
    Ok(())
}

fn scratch_dir(cfg: &ExternalConfig) -> Result<tempfile::TempDir> {
    Ok(match &cfg.scratch_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            tempfile::tempdir_in(dir)?
        }
        None => tempfile::tempdir()?,
    })
}

/// Output of an external encode: the bitstream and the command that made it.
#[derive(Debug, Clone)]
pub struct ExternalEncoded {
    pub bytes: Vec<u8>,
    pub command: String,
}

pub fn external_encode(frames: &FrameSet, qp: u8, cfg: &ExternalConfig) -> Result<ExternalEncoded> {
    let dir = scratch_dir(cfg)?;
    let input = dir.path().join("input.yuv");
    let output = dir.path().join("output.bin");
    std::fs::write(&input, write_i420(frames))?;
    let command = substitute(&cfg.encode_template, &input, &output, qp);
    run_command(&command, cfg.timeout, dir.path())?;
    let bytes = std::fs::read(&output).map_err(|e| Error::Backend {
        command: command.clone(),
        reason: format!("no output at {}: {e}", output.display()),
    })?;
    Ok(ExternalEncoded { bytes, command })
}

pub fn external_decode(
    bytes: &[u8],
    shape: (usize, usize, usize, usize),
    qp: u8,
    decode_template: Option<&str>,
    cfg: &ExternalConfig,
) -> Result<FrameSet> {
    let (w, h, views, exposures) = shape;
    let Some(template) = decode_template else {
        return read_i420(bytes, w, h, views, exposures);
    };
    let dir = scratch_dir(cfg)?;
    let input = dir.path().join("input.bin");
    let output = dir.path().join("output.yuv");
    std::fs::write(&input, bytes)?;
    let command = substitute(template, &input, &output, qp);
    run_command(&command, cfg.timeout, dir.path())?;
    let yuv = std::fs::read(&output)
        .map_err(|e| Error::Backend { command: command.clone(), reason: format!("no output: {e}") })?;
    read_i420(&yuv, w, h, views, exposures)
}
