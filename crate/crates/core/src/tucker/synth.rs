//! Random orthonormal bases and exactly low-rank test tensors.

use rand::Rng;
use rand_distr::StandardNormal;

use super::TuckerModel;
use crate::tensor::{DenseTensor, Matrix};
use crate::{Result, Scalar};

/// `rows x cols` matrix with orthonormal columns, from Gram-Schmidt on a
/// Gaussian draw (applied twice for numerical orthogonality).
pub fn random_orthonormal<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    assert!(cols <= rows, "cannot fit {cols} orthonormal columns in R^{rows}");
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while q.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &q {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, a) in v.iter_mut().zip(u) {
                    *x -= dot * a;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        q.push(v);
    }
    Matrix::from_fn(rows, cols, |r, c| T::lit(q[c][r]))
}

/// A random Tucker model with Gaussian core and its dense expansion.
pub fn random_tucker<T: Scalar, R: Rng + ?Sized>(
    dims: &[usize],
    ranks: &[usize],
    rng: &mut R,
) -> Result<(DenseTensor<T>, TuckerModel<T>)> {
    super::validate_ranks(ranks, dims)?;
    let factors: Vec<Matrix<T>> = dims
        .iter()
        .zip(ranks)
        .map(|(&s, &k)| random_orthonormal(s, k, rng))
        .collect();
    let core = DenseTensor::from_fn(ranks.to_vec(), |_| T::lit(rng.sample(StandardNormal)))?;
    let model = TuckerModel::new(core, factors, 1e-6)?;
    Ok((model.reconstruct(), model))
}

/// Dense tensor with i.i.d. uniform entries in `[-1, 1)`.
pub fn random_tensor<T: Scalar, R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<DenseTensor<T>> {
    DenseTensor::from_fn(dims.to_vec(), |_| T::lit(rng.random_range(-1.0..1.0)))
}
