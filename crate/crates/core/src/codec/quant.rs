//! Uniform scalar quantization of the Tucker core.

use crate::tensor::{DenseTensor, Matrix};
use crate::tucker::TuckerModel;
use crate::{Error, Result};

pub const MAX_QP: u8 = 51;

/// Orthonormality tolerance for factors restored from 32-bit storage.
pub const DEQUANT_ORTHONORMAL_TOL: f64 = 1e-3;

/// Core levels plus 32-bit factors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub ranks: Vec<usize>,
    pub source_dims: Vec<usize>,
    /// Column-major factor payloads.
    pub factors: Vec<Vec<f32>>,
    /// Core levels, mode-0 fastest.
    pub levels: Vec<i64>,
    pub step: f64,
    pub qp: u8,
}

pub fn check_qp(qp: u8) -> Result<()> {
    if qp > MAX_QP {
        return Err(Error::arg(format!("qp {qp} outside 0..={MAX_QP}")));
    }
    Ok(())
}

/// `Δ = max|core| · 2^((qp-51)/6) · 2⁻⁸`, or 1 for an all-zero core.
pub fn step_size(max_abs: f64, qp: u8) -> Result<f64> {
    check_qp(qp)?;
    if max_abs == 0.0 {
        return Ok(1.0);
    }
    if !max_abs.is_finite() {
        return Err(Error::Numeric("core contains non-finite values".into()));
    }
    // Split the exponent so that qp and qp - 6 differ by an exact power of two.
    let k = i32::from(qp) - 51;
    let frac = 2f64.powf(f64::from(k.rem_euclid(6)) / 6.0);
    Ok(max_abs * frac * 2f64.powi(k.div_euclid(6) - 8))
}

/// Round-half-away-from-zero quantization of the core; factors are narrowed
/// to `f32`.
pub fn quantize_core(model: &TuckerModel<f64>, qp: u8) -> Result<QuantizedModel> {
    let step = step_size(model.core().max_abs(), qp)?;
    let levels = model.core().data().iter().map(|&v| (v / step).round() as i64).collect();
    let factors = model
        .factors()
        .iter()
        .map(|f| f.data().iter().map(|&v| v as f32).collect())
        .collect();
    Ok(QuantizedModel {
        ranks: model.ranks().to_vec(),
        source_dims: model.source_dims().to_vec(),
        factors,
        levels,
        step,
        qp,
    })
}

pub fn dequantize(q: &QuantizedModel) -> Result<TuckerModel<f64>> {
    if q.ranks.len() != q.source_dims.len() || q.factors.len() != q.ranks.len() {
        return Err(Error::Corrupt("quantized model has inconsistent mode counts".into()));
    }
    if !(q.step > 0.0 && q.step.is_finite()) {
        return Err(Error::Corrupt(format!("invalid quantizer step {}", q.step)));
    }
    let core_len: usize = q.ranks.iter().product();
    if q.levels.len() != core_len {
        return Err(Error::Corrupt(format!("{} core levels for ranks {:?}", q.levels.len(), q.ranks)));
    }
    let core = DenseTensor::new(q.ranks.clone(), q.levels.iter().map(|&l| l as f64 * q.step).collect())?;
    let factors = q
        .factors
        .iter()
        .zip(q.source_dims.iter().zip(&q.ranks))
        .enumerate()
        .map(|(r, (data, (&rows, &cols)))| {
            if data.len() != rows * cols {
                return Err(Error::Corrupt(format!("factor {r} holds {} values, expected {}", data.len(), rows * cols)));
            }
            Matrix::new(rows, cols, data.iter().map(|&v| f64::from(v)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    TuckerModel::new(core, factors, DEQUANT_ORTHONORMAL_TOL)
}
