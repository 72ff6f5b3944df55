use super::{validate_ranks, TuckerModel, orthonormal_tol};
use crate::tensor::{leading_eigvecs, mode_gram, symmetric_eigen, ttmc, DenseTensor};
use crate::{Error, Result, Scalar};

/// Full higher-order SVD: every factor is the complete, sign-fixed eigenbasis
/// of the mode Gram matrix, and the core is `t ×_r S_rᵀ` over all modes.
pub fn hosvd<T: Scalar>(t: &DenseTensor<T>) -> Result<TuckerModel<T>> {
    let factors = (0..t.order())
        .map(|r| Ok(symmetric_eigen(&mode_gram(t, r)?)?.vectors))
        .collect::<Result<Vec<_>>>()?;
    let core = ttmc(t, &factors, None)?;
    TuckerModel::new(core, factors, orthonormal_tol::<T>())
}

/// Truncated HOSVD at `ranks`: leading Gram eigenvectors per mode, core by
/// orthogonal projection.
pub fn t_hosvd<T: Scalar>(t: &DenseTensor<T>, ranks: &[usize]) -> Result<TuckerModel<T>> {
    validate_ranks(ranks, t.dims())?;
    let factors = ranks
        .iter()
        .enumerate()
        .map(|(r, &k)| Ok(leading_eigvecs(&mode_gram(t, r)?, k)?.vectors))
        .collect::<Result<Vec<_>>>()?;
    let core = ttmc(t, &factors, None)?;
    TuckerModel::new(core, factors, orthonormal_tol::<T>())
}

/// Eigenvalues (nonincreasing) of each mode's Gram matrix.
pub fn mode_spectra<T: Scalar>(t: &DenseTensor<T>) -> Result<Vec<Vec<f64>>> {
    (0..t.order())
        .map(|r| {
            let pairs = symmetric_eigen(&mode_gram(t, r)?)?;
            Ok(pairs.values.iter().map(|v| v.as_f64()).collect())
        })
        .collect()
}

/// Upper bound on `‖t - t_hosvd(t, ranks)‖²`: the sum over modes of the
/// discarded Gram eigenvalues.
pub fn truncation_bound<T: Scalar>(t: &DenseTensor<T>, ranks: &[usize]) -> Result<f64> {
    validate_ranks(ranks, t.dims())?;
    let spectra = mode_spectra(t)?;
    if spectra.len() != ranks.len() {
        return Err(Error::arg("rank count does not match tensor order"));
    }
    Ok(spectra
        .iter()
        .zip(ranks)
        .map(|(vals, &k)| vals[k..].iter().map(|v| v.max(0.0)).sum::<f64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::super::synth::{random_tensor, random_tucker};
    use super::*;
    use crate::tensor::Matrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &DenseTensor<f64>, b: &DenseTensor<f64>) -> f64 {
        a.sub(b).unwrap().fro_norm() / a.fro_norm()
    }

    #[test]
    fn single_nonzero_entry() {
        let t = DenseTensor::from_fn(vec![3, 2, 2], |i| if i == [1, 0, 1] { 5.0f64 } else { 0.0 }).unwrap();
        let m = hosvd(&t).unwrap();
        let nonzero = m.core().data().iter().filter(|v| v.abs() > 1e-12).count();
        assert_eq!(nonzero, 1);
        assert!((m.core().max_abs() - 5.0).abs() < 1e-12);
        for f in m.factors() {
            for c in 0..f.cols() {
                let col = f.col(c);
                let ones = col.iter().filter(|v| (v.abs() - 1.0).abs() < 1e-12).count();
                let zeros = col.iter().filter(|v| v.abs() < 1e-12).count();
                assert_eq!((ones, zeros), (1, col.len() - 1));
            }
        }
    }

    #[test]
    fn full_hosvd_reconstructs() {
        let t = random_tensor::<f64, _>(&[4, 4, 4], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let m = hosvd(&t).unwrap();
        assert!(rel_err(&t, &m.reconstruct()) < 1e-10);
    }

    #[test]
    fn order_two_matches_matrix_svd() {
        let t = random_tensor::<f64, _>(&[5, 7], &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let m = hosvd(&t).unwrap();
        let svd = nalgebra::DMatrix::from_column_slice(5, 7, t.data()).svd(true, false);
        let u = svd.u.unwrap();
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        for (c, &j) in order.iter().enumerate() {
            let ours = m.factors()[0].col(c);
            let dot: f64 = ours.iter().zip(u.column(j).iter()).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-10, "column {c}: |dot| = {}", dot.abs());
        }
    }

    #[test]
    fn full_rank_truncation_is_hosvd() {
        let t = random_tensor::<f64, _>(&[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(t_hosvd(&t, &[3, 4, 2]).unwrap(), hosvd(&t).unwrap());
    }

    #[test]
    fn exact_low_rank_recovery() {
        let (t, _) = random_tucker::<f64, _>(&[6, 6, 6], &[2, 2, 2], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let m = t_hosvd(&t, &[2, 2, 2]).unwrap();
        assert!(rel_err(&t, &m.reconstruct()) < 1e-8);
    }

    #[test]
    fn rank_one_respects_bound() {
        let t = random_tensor::<f64, _>(&[4, 5, 3], &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let m = t_hosvd(&t, &[1, 1, 1]).unwrap();
        let err_sq = t.sub(&m.reconstruct()).unwrap().norm_sq();
        let bound = truncation_bound(&t, &[1, 1, 1]).unwrap();
        assert!(err_sq <= bound * (1.0 + 1e-8), "{err_sq} > {bound}");
        // Independent check of the bound: sum of discarded squared singular values.
        let mut indep = 0.0;
        for mode in 0..3 {
            let u = crate::tensor::unfold(&t, mode).unwrap();
            let na = nalgebra::DMatrix::from_column_slice(u.rows(), u.cols(), u.data());
            let mut sv: Vec<f64> = na.singular_values().iter().map(|s| s * s).collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            indep += sv[1..].iter().sum::<f64>();
        }
        assert!((indep - bound).abs() < 1e-10 * bound);
    }

    #[test]
    fn invalid_ranks() {
        let t = random_tensor::<f64, _>(&[3, 3], &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert!(matches!(t_hosvd(&t, &[4, 1]), Err(Error::Argument(_))));
        assert!(matches!(t_hosvd(&t, &[0, 1]), Err(Error::Argument(_))));
        assert!(matches!(t_hosvd(&t, &[1]), Err(Error::Argument(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let (t, _) = random_tucker::<f32, _>(&[6, 5, 4], &[2, 2, 2], &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let m = t_hosvd(&t, &[2, 2, 2]).unwrap();
        let rel = t.sub(&m.reconstruct()).unwrap().fro_norm() / t.fro_norm();
        assert!(rel < 1e-4, "{rel}");
        let g = mode_gram(&t, 0).unwrap();
        let v: Matrix<f32> = leading_eigvecs(&g, 2).unwrap().vectors;
        assert!(v.orthonormality_error() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn truncation_is_nested(seed in 0u64..10_000, r0 in 1usize..=4, r1 in 1usize..=3, r2 in 1usize..=3) {
            let t = random_tensor::<f64, _>(&[4, 3, 3], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let small = [r0, r1, r2];
            let big = [4.min(r0 + 1), 3.min(r1 + 1), r2];
            let e_small = t.sub(&t_hosvd(&t, &small).unwrap().reconstruct()).unwrap().norm_sq();
            let e_big = t.sub(&t_hosvd(&t, &big).unwrap().reconstruct()).unwrap().norm_sq();
            prop_assert!(e_big <= e_small + 1e-12 * t.norm_sq());
            let bound = truncation_bound(&t, &small).unwrap();
            prop_assert!(e_small <= bound + 1e-8 * t.norm_sq());
        }
    }
}
