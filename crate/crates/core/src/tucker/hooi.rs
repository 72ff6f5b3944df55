use super::{check_model_dims, TuckerModel, orthonormal_tol};
use crate::tensor::{leading_eigvecs, mode_gram, ttmc, DenseTensor, Matrix};
use crate::{Result, Scalar};

/// New factor for mode `n`: the `rank` leading eigenvectors of the Gram
/// matrix of `y`'s mode-`n` unfolding, i.e. its leading left singular vectors.
pub fn update_factor<T: Scalar>(y: &DenseTensor<T>, n: usize, rank: usize) -> Result<Matrix<T>> {
    Ok(leading_eigvecs(&mode_gram(y, n)?, rank)?.vectors)
}

/// One HOOI sweep. Modes are updated in order, each from
/// `Y = t ×_{i≠n} S_iᵀ` using the factors updated so far; the core is
/// recomputed from the final factors.
pub fn hooi_sweep<T: Scalar>(t: &DenseTensor<T>, model: &TuckerModel<T>) -> Result<TuckerModel<T>> {
    check_model_dims(t, model)?;
    let mut factors = model.factors().to_vec();
    for n in 0..t.order() {
        let y = ttmc(t, &factors, Some(n))?;
        factors[n] = update_factor(&y, n, model.ranks()[n])?;
    }
    let core = ttmc(t, &factors, None)?;
    TuckerModel::new(core, factors, orthonormal_tol::<T>())
}
