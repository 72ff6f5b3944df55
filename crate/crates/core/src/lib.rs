//! Low-multilinear-rank coding of multi-exposure stereo image stacks.
//!
//! A scene (two views, several exposures) is converted to an opponent colour
//! space, stacked per channel into an order-4 tensor `(height, width,
//! exposure, view)`, approximated with a Tucker model fitted by alternating
//! least squares, and then coded either as a quantized latent (core tensor
//! plus factor matrices) or as low-rank frames handed to a frame coder.
//!
//! The numerical layers ([`tensor`], [`tucker`], [`color`]) are generic over
//! [`Scalar`]; the aliases below fix the pipeline precision to `f64`.

pub mod codec;
pub mod color;
pub mod error;
pub mod metrics;
pub mod scalar;
pub mod scene;
pub mod tensor;
pub mod tucker;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision dense tensor used throughout the coding pipeline.
pub type Tensor = tensor::DenseTensor<f64>;
/// Single-precision dense tensor.
pub type Tensor32 = tensor::DenseTensor<f32>;
/// Double-precision column-major matrix.
pub type Mat = tensor::Matrix<f64>;
/// Single-precision column-major matrix.
pub type Mat32 = tensor::Matrix<f32>;
/// Double-precision Tucker model.
pub type Tucker = tucker::TuckerModel<f64>;
/// Single-precision Tucker model.
pub type Tucker32 = tucker::TuckerModel<f32>;
/// Double-precision colour image.
pub type Image = color::ColorImage<f64>;
