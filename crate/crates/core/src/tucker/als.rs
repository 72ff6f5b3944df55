use std::fmt::Write as _;

use super::pp::{pp_operators, pp_sweep, PPState};
use super::{fit_from_core, hooi_sweep, project_core, t_hosvd, SolveConfig, TuckerModel, orthonormal_tol};
use crate::tensor::{DenseTensor, Matrix};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Init,
    Standard,
    Perturbed,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Init => "init",
            SweepKind::Standard => "standard",
            SweepKind::Perturbed => "pp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub kind: SweepKind,
    pub fit: f64,
    /// `‖S_new - S_old‖_F / ‖S_old‖_F` per mode.
    pub factor_change: Vec<f64>,
}

impl SweepRecord {
    pub fn max_change(&self) -> f64 {
        self.factor_change.iter().cloned().fold(0.0, f64::max)
    }
}

/// Per-sweep history of one solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<SweepRecord>,
}

impl Trace {
    /// Fits of the standard sweeps, preceded by the initial fit.
    pub fn standard_fits(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.kind != SweepKind::Perturbed)
            .map(|r| r.fit)
            .collect()
    }

    pub fn sweeps(&self) -> usize {
        self.records.iter().filter(|r| r.kind != SweepKind::Init).count()
    }

    /// CSV with columns `sweep,kind,fit,max_factor_change`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,kind,fit,max_factor_change\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{:.12},{:.6e}", r.sweep, r.kind.as_str(), r.fit, r.max_change());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    pub model: TuckerModel<T>,
    pub trace: Trace,
    pub converged: bool,
    /// Exact fit of `model` against the input tensor.
    pub fit: f64,
}

fn relative_changes<T: Scalar>(new: &[Matrix<T>], old: &[Matrix<T>]) -> Vec<f64> {
    new.iter()
        .zip(old)
        .map(|(a, b)| {
            let diff = a.sub(b).expect("factor shapes fixed during a solve").fro_norm().as_f64();
            diff / b.fro_norm().as_f64().max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Tucker-ALS: truncated-HOSVD start, standard HOOI sweeps, and
/// pairwise-perturbation sweeps once the factors have settled.
pub fn tucker_als<T: Scalar>(t: &DenseTensor<T>, cfg: &SolveConfig) -> Result<SolveOutcome<T>> {
    cfg.validate(t.dims())?;
    if cfg.sequential_reduction {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
        pool.install(|| solve(t, cfg))
    } else {
        solve(t, cfg)
    }
}

fn solve<T: Scalar>(t: &DenseTensor<T>, cfg: &SolveConfig) -> Result<SolveOutcome<T>> {
    let tnorm_sq = t.norm_sq().as_f64();
    if tnorm_sq == 0.0 {
        return Err(Error::arg("cannot decompose the zero tensor"));
    }

    let mut model = t_hosvd(t, &cfg.ranks)?;
    let mut fit = fit_from_core(tnorm_sq, model.core());
    let mut trace = Trace {
        records: vec![SweepRecord {
            sweep: 0,
            kind: SweepKind::Init,
            fit,
            factor_change: vec![0.0; t.order()],
        }],
    };
    if cfg.ranks == t.dims() {
        return Ok(SolveOutcome { model, trace, converged: true, fit });
    }

    let mut best = (fit, model.clone());
    let mut pp: Option<PPState<T>> = None;
    let mut converged = false;
    for sweep in 1..=cfg.max_sweeps {
        let (next, kind, change) = match pp.take() {
            Some(state) => {
                let next = pp_sweep(&state, &model)?;
                let drift = relative_changes(next.factors(), state.anchors());
                let change = relative_changes(next.factors(), model.factors());
                if drift.iter().all(|&d| d <= cfg.pp_exit_tol) {
                    pp = Some(state);
                }
                (next, SweepKind::Perturbed, change)
            }
            None => {
                let next = hooi_sweep(t, &model)?;
                let change = relative_changes(next.factors(), model.factors());
                if cfg.pairwise_perturbation && change.iter().all(|&c| c < cfg.pp_enter_tol) {
                    pp = Some(pp_operators(t, next.factors())?);
                }
                (next, SweepKind::Standard, change)
            }
        };
        let next_fit = fit_from_core(tnorm_sq, next.core());
        trace.records.push(SweepRecord {
            sweep,
            kind,
            fit: next_fit,
            factor_change: change,
        });
        if kind == SweepKind::Standard && next_fit > best.0 {
            best = (next_fit, next.clone());
        }
        let delta = (next_fit - fit).abs();
        model = next;
        fit = next_fit;
        if delta < cfg.fit_tol {
            converged = true;
            break;
        }
    }

    // Perturbation sweeps leave an approximate core; re-project exactly.
    let core = project_core(t, model.factors())?;
    let (_, factors) = model.into_parts();
    let model = TuckerModel::new(core, factors, orthonormal_tol::<T>())?;
    let fit = fit_from_core(tnorm_sq, model.core());
    if best.0 > fit {
        return Ok(SolveOutcome { model: best.1, trace, converged, fit: best.0 });
    }
    Ok(SolveOutcome { model, trace, converged, fit })
}
