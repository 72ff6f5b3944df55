//! MSE and PSNR in 8-bit sample units, per plane and per scene view.

use crate::codec::PathTag;
use crate::color::ColorSpace;
use crate::scene::{to_u8, SceneStack};
use crate::{Error, Result};

pub const PEAK_8BIT: f64 = 255.0;

/// Mean squared difference of two equally sized planes.
pub fn mse(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::shape(None, format!("planes of {} and {} samples", reference.len(), test.len())));
    }
    if reference.is_empty() {
        return Err(Error::arg("mse of empty planes"));
    }
    let sum: f64 = reference.iter().zip(test).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / reference.len() as f64)
}

/// `10·log10(peak² / mse)`; `+∞` when `mse == 0`.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, test)?, peak))
}

/// Domain in which scene PSNR is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsnrDomain {
    /// Gamma-encoded RGB, both scenes snapped to the 8-bit grid.
    #[default]
    Rgb,
    /// The scenes' shared coding space, scaled by 255 without rounding.
    Coded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePsnr {
    /// One PSNR per view over all exposures and channels.
    pub per_view: Vec<f64>,
    /// `per_exposure[view][exposure]`, over the three channels.
    pub per_exposure: Vec<Vec<f64>>,
}

fn plane_samples(s: &SceneStack, domain: PsnrDomain, view: usize, exposure: usize) -> Vec<f64> {
    let img = s.image(view, exposure);
    img.planes()
        .iter()
        .flatten()
        .map(|&v| match domain {
            PsnrDomain::Rgb => f64::from(to_u8(v)),
            PsnrDomain::Coded => v * PEAK_8BIT,
        })
        .collect()
}

/// Per-view PSNR: MSE averaged over every exposure and channel, then one
/// PSNR per view, plus the per-exposure breakdown.
pub fn scene_psnr(reference: &SceneStack, test: &SceneStack, domain: PsnrDomain) -> Result<ScenePsnr> {
    let shape = |s: &SceneStack| (s.views(), s.exposures(), s.width(), s.height());
    if shape(reference) != shape(test) {
        return Err(Error::shape(
            None,
            format!("scene shapes {:?} and {:?} differ", shape(reference), shape(test)),
        ));
    }
    let (reference, test) = match domain {
        PsnrDomain::Rgb => {
            let rgb = |s: &SceneStack| -> Result<SceneStack> {
                Ok(if s.space() == ColorSpace::Rgb { s.clone() } else { s.to_rgb()?.0 })
            };
            (rgb(reference)?, rgb(test)?)
        }
        PsnrDomain::Coded => {
            if reference.space() != test.space() {
                return Err(Error::arg(format!(
                    "coded-space PSNR needs one space, got {} and {}",
                    reference.space(),
                    test.space()
                )));
            }
            (reference.clone(), test.clone())
        }
    };
    let mut per_view = Vec::with_capacity(reference.views());
    let mut per_exposure = Vec::with_capacity(reference.views());
    for v in 0..reference.views() {
        let mses = (0..reference.exposures())
            .map(|e| mse(&plane_samples(&reference, domain, v, e), &plane_samples(&test, domain, v, e)))
            .collect::<Result<Vec<_>>>()?;
        let mean = mses.iter().sum::<f64>() / mses.len() as f64;
        per_view.push(psnr_from_mse(mean, PEAK_8BIT));
        per_exposure.push(mses.iter().map(|&m| psnr_from_mse(m, PEAK_8BIT)).collect());
    }
    Ok(ScenePsnr { per_view, per_exposure })
}

/// One rate-distortion measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RDPoint {
    pub scene: String,
    pub space: ColorSpace,
    pub preset: usize,
    pub qp: u8,
    pub path: PathTag,
    pub bits_latent: u64,
    pub bits_backend: u64,
    /// Includes container overhead on top of the latent and backend bits.
    pub bits_total: u64,
    pub psnr_left: f64,
    /// `None` for single-view scenes.
    pub psnr_right: Option<f64>,
    pub psnr_per_exposure: Vec<Vec<f64>>,
}
