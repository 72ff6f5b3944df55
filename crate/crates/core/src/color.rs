//! Colour transforms between gamma-encoded RGB and the two coding spaces:
//! full-range BT.601 Y'CbCr and IPT.
//!
//! Every transform is pixelwise. Chroma-like channels are stored with a
//! `+0.5` offset so all three planes share the nominal `[0, 1]` range.

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Rgb,
    YCbCr,
    Ipt,
}

impl ColorSpace {
    pub fn tag(self) -> u8 {
        match self {
            ColorSpace::Rgb => 0,
            ColorSpace::YCbCr => 1,
            ColorSpace::Ipt => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ColorSpace::Rgb),
            1 => Ok(ColorSpace::YCbCr),
            2 => Ok(ColorSpace::Ipt),
            other => Err(Error::arg(format!("unknown colour space tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Rgb => "rgb",
            ColorSpace::YCbCr => "ycbcr",
            ColorSpace::Ipt => "ipt",
        }
    }
}

impl std::str::FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(ColorSpace::Rgb),
            "ycbcr" | "y'cbcr" | "yuv" => Ok(ColorSpace::YCbCr),
            "ipt" => Ok(ColorSpace::Ipt),
            other => Err(Error::arg(format!("unknown colour space `{other}`"))),
        }
    }
}

impl std::fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Transfer function of the camera RGB. Only sRGB is supported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RgbEncoding {
    #[default]
    Srgb,
}

/// Three planes of `width * height` samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage<T> {
    width: usize,
    height: usize,
    planes: [Vec<T>; 3],
    space: ColorSpace,
}

impl<T: Scalar> ColorImage<T> {
    pub fn new(width: usize, height: usize, planes: [Vec<T>; 3], space: ColorSpace) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg(format!("empty image {width}x{height}")));
        }
        for (i, p) in planes.iter().enumerate() {
            if p.len() != width * height {
                return Err(Error::shape(
                    None,
                    format!("plane {i} has {} samples, expected {}", p.len(), width * height),
                ));
            }
        }
        Ok(Self { width, height, planes, space })
    }

    /// Image with every pixel set to `px`.
    pub fn filled(width: usize, height: usize, px: [T; 3], space: ColorSpace) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, [vec![px[0]; n], vec![px[1]; n], vec![px[2]; n]], space)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn planes(&self) -> &[Vec<T>; 3] {
        &self.planes
    }

    pub fn plane(&self, c: usize) -> &[T] {
        &self.planes[c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let i = y * self.width + x;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    fn map_pixels(&self, space: ColorSpace, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        let n = self.pixel_count();
        let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for i in 0..n {
            let out = f([self.planes[0][i], self.planes[1][i], self.planes[2][i]]);
            for c in 0..3 {
                planes[c].push(out[c]);
            }
        }
        Self { width: self.width, height: self.height, planes, space }
    }

    fn expect_space(&self, want: ColorSpace) -> Result<()> {
        if self.space != want {
            return Err(Error::arg(format!("expected a {want} image, got {}", self.space)));
        }
        Ok(())
    }
}

/// Result of an inverse transform: the image plus how many samples had to be
/// clamped into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversion<T> {
    pub image: ColorImage<T>,
    pub clamped: usize,
}

fn clamp_counted<T: Scalar>(img: ColorImage<T>) -> Conversion<T> {
    let mut clamped = 0;
    let mut img = img;
    for p in img.planes.iter_mut() {
        for v in p.iter_mut() {
            let c = v.max(T::zero()).min(T::one());
            if c != *v {
                clamped += 1;
                *v = c;
            }
        }
    }
    Conversion { image: img, clamped }
}

// BT.601 luma weights.
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

/// Full-range BT.601 forward transform of one pixel, without clamping.
pub fn ycbcr_from_rgb<T: Scalar>([r, g, b]: [T; 3]) -> [T; 3] {
    let half = T::lit(0.5);
    let y = T::lit(KR) * r + T::lit(KG) * g + T::lit(KB) * b;
    let cb = half * (b - y) / T::lit(1.0 - KB) + half;
    let cr = half * (r - y) / T::lit(1.0 - KR) + half;
    [y, cb, cr]
}

/// Inverse of [`ycbcr_from_rgb`], without clamping.
pub fn rgb_from_ycbcr<T: Scalar>([y, cb, cr]: [T; 3]) -> [T; 3] {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let r = y + two * T::lit(1.0 - KR) * (cr - half);
    let b = y + two * T::lit(1.0 - KB) * (cb - half);
    let g = (y - T::lit(KR) * r - T::lit(KB) * b) / T::lit(KG);
    [r, g, b]
}

pub fn rgb_to_ycbcr<T: Scalar>(img: &ColorImage<T>) -> Result<ColorImage<T>> {
    img.expect_space(ColorSpace::Rgb)?;
    let out = img.map_pixels(ColorSpace::YCbCr, ycbcr_from_rgb);
    Ok(clamp_counted(out).image)
}

pub fn ycbcr_to_rgb<T: Scalar>(img: &ColorImage<T>) -> Result<Conversion<T>> {
    img.expect_space(ColorSpace::YCbCr)?;
    Ok(clamp_counted(img.map_pixels(ColorSpace::Rgb, rgb_from_ycbcr)))
}

// sRGB (D65) linear RGB -> CIE XYZ.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

// Hunt-Pointer-Estevez cone responses normalized to D65, as used by IPT
// (Ebner & Fairchild, 1998).
const XYZ_TO_LMS: [[f64; 3]; 3] = [
    [0.4002, 0.7075, -0.0807],
    [-0.2280, 1.1500, 0.0612],
    [0.0, 0.0, 0.9184],
];

// IPT opponent matrix from nonlinear LMS (Ebner & Fairchild, 1998).
const LMS_TO_IPT: [[f64; 3]; 3] = [
    [0.4000, 0.4000, 0.2000],
    [4.4550, -4.8510, 0.3960],
    [0.8056, 0.3572, -1.1628],
];

const IPT_EXPONENT: f64 = 0.43;

type Mat3 = [[f64; 3]; 3];

fn mul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn inv3(m: &Mat3) -> Mat3 {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = c(j, i) / det;
        }
    }
    out
}

/// The matrices of the IPT pipeline in the working precision.
#[derive(Debug, Clone, Copy)]
struct IptMatrices<T> {
    rgb_to_lms: [[T; 3]; 3],
    lms_to_rgb: [[T; 3]; 3],
    lms_to_ipt: [[T; 3]; 3],
    ipt_to_lms: [[T; 3]; 3],
}

impl<T: Scalar> IptMatrices<T> {
    fn new() -> Self {
        // The XYZ->LMS matrix maps D65 white to equal cone responses only to
        // four digits; rescale rows so RGB white lands exactly on LMS (1,1,1)
        // and neutrals carry no opponent signal.
        let mut rgb_to_lms = mul3(&XYZ_TO_LMS, &SRGB_TO_XYZ);
        for row in rgb_to_lms.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        let cast = |m: Mat3| m.map(|row| row.map(T::lit));
        Self {
            rgb_to_lms: cast(rgb_to_lms),
            lms_to_rgb: cast(inv3(&rgb_to_lms)),
            lms_to_ipt: cast(LMS_TO_IPT),
            ipt_to_lms: cast(inv3(&LMS_TO_IPT)),
        }
    }
}

fn apply<T: Scalar>(m: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn signed_pow<T: Scalar>(v: T, e: T) -> T {
    if v < T::zero() {
        -(-v).powf(e)
    } else {
        v.powf(e)
    }
}

/// sRGB EOTF (gamma-encoded -> linear), odd-extended below zero.
pub fn srgb_to_linear<T: Scalar>(v: T) -> T {
    let a = v.abs();
    let lin = if a <= T::lit(0.04045) {
        a / T::lit(12.92)
    } else {
        ((a + T::lit(0.055)) / T::lit(1.055)).powf(T::lit(2.4))
    };
    if v < T::zero() {
        -lin
    } else {
        lin
    }
}

/// Inverse of [`srgb_to_linear`].
pub fn linear_to_srgb<T: Scalar>(v: T) -> T {
    let a = v.abs();
    let enc = if a <= T::lit(0.0031308) {
        a * T::lit(12.92)
    } else {
        T::lit(1.055) * a.powf(T::lit(1.0 / 2.4)) - T::lit(0.055)
    };
    if v < T::zero() {
        -enc
    } else {
        enc
    }
}

fn ipt_from_rgb_with<T: Scalar>(m: &IptMatrices<T>, rgb: [T; 3]) -> [T; 3] {
    let e = T::lit(IPT_EXPONENT);
    let lms = apply(&m.rgb_to_lms, rgb.map(srgb_to_linear));
    let ipt = apply(&m.lms_to_ipt, lms.map(|v| signed_pow(v, e)));
    let half = T::lit(0.5);
    [ipt[0], half * ipt[1] + half, half * ipt[2] + half]
}

fn rgb_from_ipt_with<T: Scalar>(m: &IptMatrices<T>, enc: [T; 3]) -> [T; 3] {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let ipt = [enc[0], (enc[1] - half) * two, (enc[2] - half) * two];
    let inv_e = T::lit(1.0 / IPT_EXPONENT);
    let lms = apply(&m.ipt_to_lms, ipt).map(|v| signed_pow(v, inv_e));
    apply(&m.lms_to_rgb, lms).map(linear_to_srgb)
}

/// Gamma-encoded sRGB pixel to offset-encoded IPT, without clamping.
pub fn ipt_from_rgb<T: Scalar>(rgb: [T; 3]) -> [T; 3] {
    ipt_from_rgb_with(&IptMatrices::new(), rgb)
}

/// Inverse of [`ipt_from_rgb`], without clamping.
pub fn rgb_from_ipt<T: Scalar>(ipt: [T; 3]) -> [T; 3] {
    rgb_from_ipt_with(&IptMatrices::new(), ipt)
}

pub fn rgb_to_ipt<T: Scalar>(img: &ColorImage<T>) -> Result<ColorImage<T>> {
    img.expect_space(ColorSpace::Rgb)?;
    let m = IptMatrices::new();
    Ok(img.map_pixels(ColorSpace::Ipt, |px| ipt_from_rgb_with(&m, px)))
}

pub fn ipt_to_rgb<T: Scalar>(img: &ColorImage<T>) -> Result<Conversion<T>> {
    img.expect_space(ColorSpace::Ipt)?;
    let m = IptMatrices::new();
    Ok(clamp_counted(img.map_pixels(ColorSpace::Rgb, |px| rgb_from_ipt_with(&m, px))))
}

/// Convert an RGB image into `space` (identity for RGB).
pub fn to_space<T: Scalar>(img: &ColorImage<T>, space: ColorSpace) -> Result<ColorImage<T>> {
    match space {
        ColorSpace::Rgb => {
            img.expect_space(ColorSpace::Rgb)?;
            Ok(img.clone())
        }
        ColorSpace::YCbCr => rgb_to_ycbcr(img),
        ColorSpace::Ipt => rgb_to_ipt(img),
    }
}

/// Convert any supported image back to RGB, clamping into `[0, 1]`.
pub fn to_rgb<T: Scalar>(img: &ColorImage<T>) -> Result<Conversion<T>> {
    match img.space {
        ColorSpace::Rgb => Ok(clamp_counted(img.clone())),
        ColorSpace::YCbCr => ycbcr_to_rgb(img),
        ColorSpace::Ipt => ipt_to_rgb(img),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn px_img(px: [f64; 3]) -> ColorImage<f64> {
        ColorImage::filled(1, 1, px, ColorSpace::Rgb).unwrap()
    }

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn ycbcr_reference_pixels() {
        assert!(close(ycbcr_from_rgb([1.0, 1.0, 1.0]), [1.0, 0.5, 0.5], 1e-15));
        assert!(close(ycbcr_from_rgb([0.0, 0.0, 0.0]), [0.0, 0.5, 0.5], 1e-15));
        let red: [f64; 3] = ycbcr_from_rgb([1.0, 0.0, 0.0]);
        assert!((red[0] - 0.299).abs() < 1e-15);
        assert!((red[1] - (0.5 - 0.299 / 1.772)).abs() < 1e-12);
        assert!((red[1] - 0.33127).abs() < 1e-5);
        assert!((red[2] - 1.0).abs() < 1e-12);
        assert!(close(ycbcr_from_rgb([0.5, 0.5, 0.5]), [0.5, 0.5, 0.5], 1e-15));
        assert!(close(rgb_from_ycbcr([0.5, 0.5, 0.5]), [0.5, 0.5, 0.5], 1e-15));
    }

    #[test]
    fn image_transforms_check_space() {
        let img = px_img([0.2, 0.4, 0.6]);
        let y = rgb_to_ycbcr(&img).unwrap();
        assert_eq!(y.space(), ColorSpace::YCbCr);
        assert!(rgb_to_ycbcr(&y).is_err());
        assert!(ycbcr_to_rgb(&img).is_err());
        assert!(ipt_to_rgb(&img).is_err());
        assert!(rgb_to_ipt(&y).is_err());
        let back = ycbcr_to_rgb(&y).unwrap();
        assert_eq!(back.clamped, 0);
        assert!(close(back.image.pixel(0, 0), [0.2, 0.4, 0.6], 1e-12));
    }

    /// Scalar evaluation of the published matrices, independent of the
    /// composed/normalized matrices used by the implementation.
    fn ipt_oracle(rgb: [f64; 3]) -> [f64; 3] {
        let lin = rgb.map(srgb_to_linear);
        let mv = |m: &Mat3, v: [f64; 3]| [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2]);
        let xyz = mv(&SRGB_TO_XYZ, lin);
        let lms = mv(&XYZ_TO_LMS, xyz);
        let white = mv(&XYZ_TO_LMS, mv(&SRGB_TO_XYZ, [1.0; 3]));
        let lms = [0, 1, 2].map(|i| lms[i] / white[i]);
        let p = lms.map(|v| v.signum() * v.abs().powf(0.43));
        let ipt = mv(&LMS_TO_IPT, p);
        [ipt[0], 0.5 * ipt[1] + 0.5, 0.5 * ipt[2] + 0.5]
    }

    #[test]
    fn ipt_reference_pixels() {
        assert!(close(ipt_from_rgb([1.0, 1.0, 1.0]), [1.0, 0.5, 0.5], 1e-12));
        assert!(close(ipt_from_rgb([0.0, 0.0, 0.0]), [0.0, 0.5, 0.5], 1e-15));
        for px in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, 0.5, 0.9], [0.03, 0.01, 0.02]] {
            assert!(close(ipt_from_rgb(px), ipt_oracle(px), 1e-12), "{px:?}");
        }
    }

    #[test]
    fn grays_have_zero_chroma() {
        for k in 0..=10 {
            let g = k as f64 / 10.0;
            let ipt = ipt_from_rgb([g, g, g]);
            assert!((ipt[1] - 0.5).abs() < 1e-6 && (ipt[2] - 0.5).abs() < 1e-6, "gray {g}: {ipt:?}");
            let ycc = ycbcr_from_rgb([g, g, g]);
            assert!((ycc[1] - 0.5).abs() < 1e-12 && (ycc[2] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ipt_round_trip_primaries() {
        for px in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0; 3]] {
            let back = ipt_to_rgb(&rgb_to_ipt(&px_img(px)).unwrap()).unwrap();
            assert!(close(back.image.pixel(0, 0), px, 1e-4), "{px:?}");
        }
    }

    #[test]
    fn ipt_clamps_and_counts_out_of_gamut() {
        let img = ColorImage::filled(2, 1, [0.5, 1.0, 0.0], ColorSpace::Ipt).unwrap();
        let out = ipt_to_rgb(&img).unwrap();
        assert!(out.clamped > 0);
        assert!(out.image.plane(0).iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn pixel_permutation_commutes() {
        let img = ColorImage::new(
            3,
            1,
            [vec![0.1, 0.5, 0.9], vec![0.2, 0.6, 0.3], vec![0.7, 0.4, 0.0]],
            ColorSpace::Rgb,
        )
        .unwrap();
        let perm = ColorImage::new(
            3,
            1,
            [vec![0.9, 0.1, 0.5], vec![0.3, 0.2, 0.6], vec![0.0, 0.7, 0.4]],
            ColorSpace::Rgb,
        )
        .unwrap();
        let a = rgb_to_ipt(&img).unwrap();
        let b = rgb_to_ipt(&perm).unwrap();
        for c in 0..3 {
            assert_eq!(a.plane(c)[0], b.plane(c)[1]);
            assert_eq!(a.plane(c)[2], b.plane(c)[0]);
        }
    }

    #[test]
    fn space_tags_round_trip() {
        for s in [ColorSpace::Rgb, ColorSpace::YCbCr, ColorSpace::Ipt] {
            assert_eq!(ColorSpace::from_tag(s.tag()).unwrap(), s);
            assert_eq!(s.name().parse::<ColorSpace>().unwrap(), s);
        }
        assert!(ColorSpace::from_tag(9).is_err());
    }

    proptest! {
        #[test]
        fn ycbcr_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = rgb_from_ycbcr(ycbcr_from_rgb([r, g, b]));
            prop_assert!(close(back, [r, g, b], 1e-12));
        }

        #[test]
        fn ipt_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = rgb_from_ipt(ipt_from_rgb([r, g, b]));
            prop_assert!(close(back, [r, g, b], 1e-4));
        }
    }
}
