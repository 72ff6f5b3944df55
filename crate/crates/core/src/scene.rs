//! Multi-exposure stereo scenes: directory loading, order-4 tensor stacking
//! and 8-bit image export.
//!
//! A scene directory holds one file per (view, exposure) named
//! `{left|right}_{e}.{png|ppm}` with `e` counting from 0. Each colour channel
//! of a scene becomes one tensor with modes `(height, width, exposure, view)`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::color::{self, ColorImage, ColorSpace};
use crate::tensor::DenseTensor;
use crate::{Error, Result};

/// View names in view-index order.
pub const VIEW_NAMES: [&str; 2] = ["left", "right"];

/// Identifier of the `(height, width, exposure, view)` mode order, the only
/// layout defined so far.
pub const LAYOUT_HWEV: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Ppm => "ppm",
        }
    }
}

/// Shape and naming information shared by every image of a scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneMeta {
    pub name: String,
    pub views: usize,
    pub exposures: usize,
    pub width: usize,
    pub height: usize,
    pub space: ColorSpace,
}

impl SceneMeta {
    /// Tensor dimensions `(H, W, E, V)` of one channel.
    pub fn tensor_dims(&self) -> [usize; 4] {
        [self.height, self.width, self.exposures, self.views]
    }
}

/// Complete `views × exposures` table of equally sized images.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneStack {
    meta: SceneMeta,
    /// Indexed by `view * exposures + exposure`.
    images: Vec<ColorImage<f64>>,
}

impl SceneStack {
    /// `images[v][e]` is view `v` at exposure `e`.
    pub fn new(name: impl Into<String>, images: Vec<Vec<ColorImage<f64>>>) -> Result<Self> {
        let views = images.len();
        if views == 0 || views > VIEW_NAMES.len() {
            return Err(Error::arg(format!("a scene needs 1 or 2 views, got {views}")));
        }
        let exposures = images[0].len();
        if exposures == 0 || exposures > u8::MAX as usize {
            return Err(Error::arg(format!("unsupported exposure count {exposures}")));
        }
        if images.iter().any(|v| v.len() != exposures) {
            return Err(Error::arg("views have different exposure counts"));
        }
        let first = &images[0][0];
        let meta = SceneMeta {
            name: name.into(),
            views,
            exposures,
            width: first.width(),
            height: first.height(),
            space: first.space(),
        };
        let images: Vec<_> = images.into_iter().flatten().collect();
        for img in &images {
            if (img.width(), img.height()) != (meta.width, meta.height) {
                return Err(Error::arg(format!(
                    "mixed resolutions: {}x{} and {}x{}",
                    meta.width,
                    meta.height,
                    img.width(),
                    img.height()
                )));
            }
            if img.space() != meta.space {
                return Err(Error::arg("images of one scene must share a colour space"));
            }
        }
        Ok(Self { meta, images })
    }

    pub fn meta(&self) -> &SceneMeta {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn views(&self) -> usize {
        self.meta.views
    }

    pub fn exposures(&self) -> usize {
        self.meta.exposures
    }

    pub fn width(&self) -> usize {
        self.meta.width
    }

    pub fn height(&self) -> usize {
        self.meta.height
    }

    pub fn space(&self) -> ColorSpace {
        self.meta.space
    }

    pub fn image(&self, view: usize, exposure: usize) -> &ColorImage<f64> {
        &self.images[view * self.meta.exposures + exposure]
    }

    /// Images in view-major order.
    pub fn images(&self) -> &[ColorImage<f64>] {
        &self.images
    }

    fn map_images(&self, f: impl Fn(&ColorImage<f64>) -> Result<ColorImage<f64>> + Sync + Send) -> Result<Self> {
        let images = self.images.par_iter().map(f).collect::<Result<Vec<_>>>()?;
        let space = images[0].space();
        Ok(Self { meta: SceneMeta { space, ..self.meta.clone() }, images })
    }

    /// Convert an RGB scene into `space`.
    pub fn to_space(&self, space: ColorSpace) -> Result<Self> {
        self.map_images(|img| color::to_space(img, space))
    }

    /// Convert back to RGB, returning the number of clamped samples.
    pub fn to_rgb(&self) -> Result<(Self, usize)> {
        let converted = self.images.par_iter().map(color::to_rgb).collect::<Result<Vec<_>>>()?;
        let clamped = converted.iter().map(|c| c.clamped).sum();
        let images = converted.into_iter().map(|c| c.image).collect();
        Ok((Self { meta: SceneMeta { space: ColorSpace::Rgb, ..self.meta.clone() }, images }, clamped))
    }

    /// Snap every sample to the nearest 8-bit level after clamping.
    pub fn quantize_8bit(&self) -> Self {
        let images = self
            .images
            .iter()
            .map(|img| {
                let planes = img.planes().clone().map(|p| p.into_iter().map(|v| f64::from(to_u8(v)) / 255.0).collect());
                ColorImage::new(img.width(), img.height(), planes, img.space()).expect("same shape")
            })
            .collect();
        Self { meta: self.meta.clone(), images }
    }
}

fn find_image(dir: &Path, view: &str, exposure: usize) -> Option<PathBuf> {
    ["png", "ppm"]
        .iter()
        .map(|ext| dir.join(format!("{view}_{exposure}.{ext}")))
        .find(|p| p.is_file())
}

/// Read an 8-bit image as an RGB [`ColorImage`] with samples `/255`.
pub fn read_image(path: &Path) -> Result<ColorImage<f64>> {
    let rgb = image::open(path)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut planes = [Vec::with_capacity(w * h), Vec::with_capacity(w * h), Vec::with_capacity(w * h)];
    for px in rgb.pixels() {
        for c in 0..3 {
            planes[c].push(f64::from(px.0[c]) / 255.0);
        }
    }
    ColorImage::new(w, h, planes, ColorSpace::Rgb)
}

/// Load a scene directory. The exposure count is the number of consecutive
/// `left_{e}` files; the scene is stereo if `right_0` exists.
pub fn load_scene(dir: &Path) -> Result<SceneStack> {
    if !dir.is_dir() {
        return Err(Error::arg(format!("scene directory {} does not exist", dir.display())));
    }
    let exposures = (0..).take_while(|&e| find_image(dir, VIEW_NAMES[0], e).is_some()).count();
    if exposures == 0 {
        return Err(Error::MissingImage { dir: dir.to_path_buf(), view: VIEW_NAMES[0].into(), exposure: 0 });
    }
    let views = if find_image(dir, VIEW_NAMES[1], 0).is_some() { 2 } else { 1 };
    let mut paths = Vec::with_capacity(views * exposures);
    for view in &VIEW_NAMES[..views] {
        for e in 0..exposures {
            let p = find_image(dir, view, e).ok_or_else(|| Error::MissingImage {
                dir: dir.to_path_buf(),
                view: view.to_string(),
                exposure: e,
            })?;
            paths.push(p);
        }
    }
    let flat = paths.par_iter().map(|p| read_image(p)).collect::<Result<Vec<_>>>()?;
    let mut flat = flat.into_iter();
    let images = (0..views).map(|_| flat.by_ref().take(exposures).collect()).collect();
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    SceneStack::new(name, images)
}

/// Channel `channel` of every image as a tensor of dims `(H, W, E, V)`.
pub fn stack_to_tensor(s: &SceneStack, channel: usize) -> Result<DenseTensor<f64>> {
    if channel >= 3 {
        return Err(Error::arg(format!("channel {channel} out of range 0..3")));
    }
    let [h, w, e_count, v_count] = s.meta.tensor_dims();
    let mut data = Vec::with_capacity(h * w * e_count * v_count);
    for v in 0..v_count {
        for e in 0..e_count {
            let plane = s.image(v, e).plane(channel);
            for x in 0..w {
                for y in 0..h {
                    data.push(plane[y * w + x]);
                }
            }
        }
    }
    DenseTensor::new(vec![h, w, e_count, v_count], data)
}

/// Inverse of [`stack_to_tensor`] over all three channels. Values are kept
/// as-is; clamping happens on export.
pub fn tensor_to_stack(channels: &[DenseTensor<f64>], meta: &SceneMeta) -> Result<SceneStack> {
    if channels.len() != 3 {
        return Err(Error::arg(format!("expected 3 channel tensors, got {}", channels.len())));
    }
    let dims = meta.tensor_dims();
    for (c, t) in channels.iter().enumerate() {
        if t.dims() != dims {
            return Err(Error::shape(None, format!("channel {c} has dims {:?}, scene needs {dims:?}", t.dims())));
        }
        if t.data().iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric(format!("channel {c} contains NaN")));
        }
    }
    let [h, w, e_count, v_count] = dims;
    let frame = h * w;
    let images = (0..v_count)
        .map(|v| {
            (0..e_count)
                .map(|e| {
                    let off = (v * e_count + e) * frame;
                    let planes = [0, 1, 2].map(|c| {
                        let src = &channels[c].data()[off..off + frame];
                        let mut plane = vec![0.0; frame];
                        for x in 0..w {
                            for y in 0..h {
                                plane[y * w + x] = src[x * h + y];
                            }
                        }
                        plane
                    });
                    ColorImage::new(w, h, planes, meta.space)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SceneStack::new(meta.name.clone(), images)
}

/// `[0, 1]` sample to 8 bits: clamp, scale by 255, round half away from zero.
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write an RGB image as 8-bit PNG or binary PPM.
pub fn write_image(img: &ColorImage<f64>, path: &Path, format: ImageFormat) -> Result<()> {
    if img.space() != ColorSpace::Rgb {
        return Err(Error::arg(format!("only RGB images can be written, got {}", img.space())));
    }
    let (w, h) = (img.width(), img.height());
    let mut buf = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        for c in 0..3 {
            buf.push(to_u8(img.plane(c)[i]));
        }
    }
    let out = BufWriter::new(File::create(path)?);
    match format {
        ImageFormat::Png => {
            let rgb = RgbImage::from_raw(w as u32, h as u32, buf).expect("buffer sized to image");
            image::codecs::png::PngEncoder::new(out).write_image(&rgb, w as u32, h as u32, ExtendedColorType::Rgb8)?;
        }
        ImageFormat::Ppm => {
            PnmEncoder::new(out)
                .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
                .write_image(&buf, w as u32, h as u32, ExtendedColorType::Rgb8)?;
        }
    }
    Ok(())
}

/// Write every image of an RGB scene into `dir` using the scene naming
/// convention. Returns the written paths in view-major order.
pub fn write_scene(s: &SceneStack, dir: &Path, format: ImageFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut jobs = Vec::with_capacity(s.images.len());
    for v in 0..s.views() {
        for e in 0..s.exposures() {
            jobs.push((dir.join(format!("{}_{e}.{}", VIEW_NAMES[v], format.extension())), s.image(v, e)));
        }
    }
    jobs.par_iter().map(|(p, img)| write_image(img, p, format)).collect::<Result<Vec<_>>>()?;
    Ok(jobs.into_iter().map(|(p, _)| p).collect())
}

/// Deterministic synthetic bracketed stereo scene on the 8-bit grid.
///
/// The radiance map is a smooth gradient with a few soft discs; exposure `e`
/// scales it by `2^(e - (E-1)/2)` before an sRGB-like tone curve and
/// clipping, and the right view is the left view shifted by a fixed
/// disparity.
pub fn synthetic_scene(width: usize, height: usize, views: usize, exposures: usize, seed: u64) -> Result<SceneStack> {
    if width == 0 || height == 0 {
        return Err(Error::arg("synthetic scene needs a non-empty frame"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let discs: Vec<([f64; 2], f64, [f64; 3])> = (0..6)
        .map(|_| {
            let centre = [rng.random::<f64>(), rng.random::<f64>()];
            let radius = 0.08 + 0.2 * rng.random::<f64>();
            let colour = [0.1 + 0.8 * rng.random::<f64>(), 0.1 + 0.8 * rng.random::<f64>(), 0.1 + 0.8 * rng.random::<f64>()];
            (centre, radius, colour)
        })
        .collect();
    let disparity = (width as f64 * 0.03).round().max(1.0);
    let radiance = |x: f64, y: f64| -> [f64; 3] {
        let u = x / width as f64;
        let v = y / height as f64;
        let mut r = [0.05 + 0.2 * u, 0.08 + 0.15 * v, 0.1 + 0.1 * (1.0 - u)];
        for (c, rad, col) in &discs {
            let d2 = ((u - c[0]).powi(2) + (v - c[1]).powi(2)) / (rad * rad);
            let wgt = (-d2).exp();
            for k in 0..3 {
                r[k] += wgt * col[k];
            }
        }
        r
    };
    let images = (0..views)
        .map(|view| {
            (0..exposures)
                .map(|e| {
                    let gain = 2f64.powf(e as f64 - (exposures as f64 - 1.0) / 2.0);
                    let mut planes = [vec![0.0; width * height], vec![0.0; width * height], vec![0.0; width * height]];
                    for y in 0..height {
                        for x in 0..width {
                            let r = radiance(x as f64 + view as f64 * disparity, y as f64);
                            for c in 0..3 {
                                let lin = (r[c] * gain).min(1.0);
                                let enc = color::linear_to_srgb(lin);
                                planes[c][y * width + x] = f64::from(to_u8(enc)) / 255.0;
                            }
                        }
                    }
                    ColorImage::new(width, height, planes, ColorSpace::Rgb)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SceneStack::new(format!("synthetic_{width}x{height}_s{seed}"), images)
}
