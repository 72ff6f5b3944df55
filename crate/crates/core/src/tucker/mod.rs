//! Tucker decomposition: HOSVD, truncated HOSVD, HOOI sweeps and
//! pairwise-perturbation accelerated ALS.

mod als;
mod hooi;
mod hosvd;
mod pp;
pub mod synth;

pub use als::{tucker_als, SolveOutcome, SweepKind, SweepRecord, Trace};
pub use hooi::{hooi_sweep, update_factor};
pub use hosvd::{hosvd, mode_spectra, t_hosvd, truncation_bound};
pub use pp::{naive_contraction_count, perturbed_ttmc, pp_operators, pp_sweep, PPState};

use crate::tensor::{ttm, ttmc, DenseTensor, Matrix};
use crate::{Error, Result, Scalar};

/// Orthonormality tolerance every `f64` factor produced by the solver meets.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Solver orthonormality tolerance at precision `T`.
pub fn orthonormal_tol<T: Scalar>() -> f64 {
    ORTHONORMAL_TOL.max(1e3 * T::epsilon().as_f64())
}

/// Core tensor plus one orthonormal-column factor per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel<T> {
    core: DenseTensor<T>,
    factors: Vec<Matrix<T>>,
    source_dims: Vec<usize>,
}

impl<T: Scalar> TuckerModel<T> {
    /// Assemble a model, checking shapes and that every factor is orthonormal
    /// within `tol`.
    pub fn new(core: DenseTensor<T>, factors: Vec<Matrix<T>>, tol: f64) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::arg(format!(
                "{} factors for an order-{} core",
                factors.len(),
                core.order()
            )));
        }
        let mut source_dims = Vec::with_capacity(factors.len());
        for (r, (f, &rank)) in factors.iter().zip(core.dims()).enumerate() {
            if f.cols() != rank {
                return Err(Error::shape(
                    Some(r),
                    format!("factor has {} columns, core rank is {rank}", f.cols()),
                ));
            }
            if rank > f.rows() {
                return Err(Error::shape(
                    Some(r),
                    format!("rank {rank} exceeds mode size {}", f.rows()),
                ));
            }
            let err = f.orthonormality_error().as_f64();
            if err.is_nan() || err >= tol {
                return Err(Error::Numeric(format!(
                    "factor {r} is not orthonormal (max |SᵀS - I| = {err:e})"
                )));
            }
            source_dims.push(f.rows());
        }
        Ok(Self {
            core,
            factors,
            source_dims,
        })
    }

    pub fn core(&self) -> &DenseTensor<T> {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix<T>] {
        &self.factors
    }

    pub fn source_dims(&self) -> &[usize] {
        &self.source_dims
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn into_parts(self) -> (DenseTensor<T>, Vec<Matrix<T>>) {
        (self.core, self.factors)
    }

    /// `core ×_1 S1 ×_2 S2 … ×_N SN`.
    pub fn reconstruct(&self) -> DenseTensor<T> {
        reconstruct(self)
    }
}

/// Expand a model back to a dense tensor of `source_dims`.
pub fn reconstruct<T: Scalar>(model: &TuckerModel<T>) -> DenseTensor<T> {
    let mut cur = model.core.clone();
    for (mode, f) in model.factors.iter().enumerate() {
        cur = ttm(&cur, f, mode).expect("model shapes validated on construction");
    }
    cur
}

/// `1 - ‖t - reconstruct(model)‖ / ‖t‖`, from an explicit reconstruction.
pub fn fit<T: Scalar>(t: &DenseTensor<T>, model: &TuckerModel<T>) -> Result<f64> {
    check_model_dims(t, model)?;
    let tnorm = t.fro_norm().as_f64();
    if tnorm == 0.0 {
        return Err(Error::arg("fit is undefined for the zero tensor"));
    }
    let residual = t.sub(&reconstruct(model))?.fro_norm().as_f64();
    Ok(1.0 - residual / tnorm)
}

/// Fit via `‖t - t̂‖² = ‖t‖² - ‖core‖²`, valid when the factors are
/// orthonormal and `core = ttmc(t, factors)`.
pub fn fit_from_core(tnorm_sq: f64, core: &DenseTensor<impl Scalar>) -> f64 {
    let resid_sq = (tnorm_sq - core.norm_sq().as_f64()).max(0.0);
    1.0 - resid_sq.sqrt() / tnorm_sq.sqrt()
}

/// Project `t` onto the factor bases: `t ×_i factors[i]ᵀ` for every mode.
pub fn project_core<T: Scalar>(t: &DenseTensor<T>, factors: &[Matrix<T>]) -> Result<DenseTensor<T>> {
    ttmc(t, factors, None)
}

pub(crate) fn check_model_dims<T: Scalar>(t: &DenseTensor<T>, model: &TuckerModel<T>) -> Result<()> {
    if t.dims() != model.source_dims() {
        return Err(Error::shape(
            None,
            format!(
                "tensor dims {:?} do not match model dims {:?}",
                t.dims(),
                model.source_dims()
            ),
        ));
    }
    Ok(())
}

/// Solver settings. Ranks are per mode, `1 <= ranks[r] <= dims[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub ranks: Vec<usize>,
    /// ALS sweeps after initialization; 0 returns the truncated HOSVD.
    pub max_sweeps: usize,
    pub fit_tol: f64,
    /// Switch to perturbation sweeps once the largest relative factor change
    /// of a standard sweep falls below this.
    pub pp_enter_tol: f64,
    /// Fall back to a standard sweep once `‖dS‖/‖S_p‖` exceeds this.
    pub pp_exit_tol: f64,
    pub pairwise_perturbation: bool,
    /// Run every contraction on one thread.
    pub sequential_reduction: bool,
    /// Recorded for reproducibility; the solver itself draws no random numbers.
    pub seed: u64,
}

impl SolveConfig {
    pub fn new(ranks: Vec<usize>) -> Self {
        Self {
            ranks,
            max_sweeps: 50,
            fit_tol: 1e-5,
            pp_enter_tol: 0.1,
            pp_exit_tol: 0.3,
            pairwise_perturbation: true,
            sequential_reduction: false,
            seed: 0,
        }
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        validate_ranks(&self.ranks, dims)?;
        for (name, v) in [
            ("fit_tol", self.fit_tol),
            ("pp_enter_tol", self.pp_enter_tol),
            ("pp_exit_tol", self.pp_exit_tol),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::arg(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_ranks(ranks: &[usize], dims: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(Error::arg(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            dims.len()
        )));
    }
    for (mode, (&k, &s)) in ranks.iter().zip(dims).enumerate() {
        if k == 0 || k > s {
            return Err(Error::arg(format!(
                "rank {k} at mode {mode} outside 1..={s}"
            )));
        }
    }
    Ok(())
}
