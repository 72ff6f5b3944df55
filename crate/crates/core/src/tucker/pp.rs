//! Pairwise perturbation.
//!
//! Around anchor factors `S_p`, the TTMc result for mode `n` is approximated
//! to first order in `dS = S - S_p`:
//!
//! ```text
//! Ỹ(n) = Y_p(n) + Σ_{i≠n} Y_p(i,n) ×_i dS_iᵀ
//! Y_p(n)   = t ×_{l≠n} S_p,lᵀ
//! Y_p(i,n) = t ×_{j∉{i,n}} S_p,jᵀ
//! ```
//!
//! The operators are computed once per anchor set. Partial contractions are
//! identified by the set of modes still uncontracted and cached, so every
//! intermediate tensor is evaluated at most once. Single-skip operators follow
//! the ascending-mode chain used by [`ttmc`](crate::tensor::ttmc), which
//! makes them bit-identical to a standard sweep at the anchors. Pair
//! operators come from a binary dimension tree over the modes.

use std::collections::HashMap;

use super::hooi::update_factor;
use super::{TuckerModel, orthonormal_tol};
use crate::tensor::{ttm_transposed, DenseTensor, Matrix};
use crate::{Error, Result, Scalar};

/// Precomputed perturbation operators for one anchor set.
#[derive(Debug, Clone)]
pub struct PPState<T> {
    anchors: Vec<Matrix<T>>,
    op_single: Vec<DenseTensor<T>>,
    op_pair: HashMap<(usize, usize), DenseTensor<T>>,
    contractions: usize,
    evaluated: Vec<u64>,
}

impl<T: Scalar> PPState<T> {
    pub fn anchors(&self) -> &[Matrix<T>] {
        &self.anchors
    }

    /// `Y_p(n)`.
    pub fn single(&self, n: usize) -> &DenseTensor<T> {
        &self.op_single[n]
    }

    /// `Y_p(i,n)`; symmetric in its two modes.
    pub fn pair(&self, i: usize, n: usize) -> Option<&DenseTensor<T>> {
        self.op_pair.get(&(i.min(n), i.max(n)))
    }

    /// Number of single-mode products evaluated while building the operators.
    pub fn contractions(&self) -> usize {
        self.contractions
    }

    /// Uncontracted-mode sets (as bitmasks) of every evaluated intermediate,
    /// in evaluation order.
    pub fn evaluated_nodes(&self) -> &[u64] {
        &self.evaluated
    }

    /// `dS_n = current - anchor` for every mode.
    pub fn deltas(&self, factors: &[Matrix<T>]) -> Result<Vec<Matrix<T>>> {
        factors.iter().zip(&self.anchors).map(|(f, a)| f.sub(a)).collect()
    }
}

/// Single-mode products needed to form every `Y_p(n)` and `Y_p(i,n)`
/// independently, without any reuse.
pub fn naive_contraction_count(order: usize) -> usize {
    let pairs = order * order.saturating_sub(1) / 2;
    order * order.saturating_sub(1) + pairs * order.saturating_sub(2)
}

struct TreeBuilder<'a, T> {
    t: &'a DenseTensor<T>,
    anchors: &'a [Matrix<T>],
    full: u64,
    nodes: HashMap<u64, DenseTensor<T>>,
    contractions: usize,
    evaluated: Vec<u64>,
}

impl<'a, T: Scalar> TreeBuilder<'a, T> {
    fn node(&self, mask: u64) -> &DenseTensor<T> {
        if mask == self.full {
            self.t
        } else {
            &self.nodes[&mask]
        }
    }

    /// Contract `mode` out of the node `mask`, reusing a cached result.
    fn contract(&mut self, mask: u64, mode: usize) -> Result<u64> {
        let child = mask & !(1u64 << mode);
        if child == mask || child == self.full || self.nodes.contains_key(&child) {
            return Ok(child);
        }
        let out = ttm_transposed(self.node(mask), &self.anchors[mode], mode)?;
        self.contractions += 1;
        self.evaluated.push(child);
        self.nodes.insert(child, out);
        Ok(child)
    }

    fn contract_all(&mut self, mut mask: u64, modes: &[usize]) -> Result<u64> {
        for &m in modes {
            mask = self.contract(mask, m)?;
        }
        Ok(mask)
    }

    /// Nodes `keep ∪ P` for every `P ⊆ free` with `|P| = want` (1 or 2),
    /// reachable from `mask = keep ∪ free`.
    fn descend(&mut self, mask: u64, keep: u64, free: &[usize], want: usize) -> Result<Vec<u64>> {
        if free.len() == want {
            return Ok(vec![mask]);
        }
        let (a, b) = free.split_at(free.len() / 2);
        let mut out = Vec::new();
        if a.len() >= want {
            let m = self.contract_all(mask, b)?;
            out.extend(self.descend(m, keep, a, want)?);
        }
        if b.len() >= want {
            let m = self.contract_all(mask, a)?;
            out.extend(self.descend(m, keep, b, want)?);
        }
        if want == 2 {
            let b_bits = bits(b);
            for leaf in self.descend(mask, keep | b_bits, a, 1)? {
                let ai = leaf & !(keep | b_bits);
                out.extend(self.descend(leaf, keep | ai, b, 1)?);
            }
        }
        Ok(out)
    }
}

fn bits(modes: &[usize]) -> u64 {
    modes.iter().fold(0, |acc, &m| acc | (1u64 << m))
}

fn mask_modes(mask: u64) -> Vec<usize> {
    (0..64).filter(|&m| mask & (1u64 << m) != 0).collect()
}

/// Build the pairwise-perturbation operators around `anchors`.
pub fn pp_operators<T: Scalar>(t: &DenseTensor<T>, anchors: &[Matrix<T>]) -> Result<PPState<T>> {
    let order = t.order();
    if order > 63 {
        return Err(Error::arg("pairwise perturbation supports at most 63 modes"));
    }
    if anchors.len() != order {
        return Err(Error::arg(format!("{} anchors for an order-{order} tensor", anchors.len())));
    }
    for (i, (a, &s)) in anchors.iter().zip(t.dims()).enumerate() {
        if a.rows() != s {
            return Err(Error::shape(
                Some(i),
                format!("anchor has {} rows, tensor mode size is {s}", a.rows()),
            ));
        }
    }

    let full = (1u64 << order) - 1;
    let mut tb = TreeBuilder {
        t,
        anchors,
        full,
        nodes: HashMap::new(),
        contractions: 0,
        evaluated: Vec::new(),
    };

    // Singles: ascending-mode chains sharing their common prefixes.
    let mut single_masks = Vec::with_capacity(order);
    for n in 0..order {
        let modes: Vec<usize> = (0..order).filter(|&m| m != n).collect();
        single_masks.push(tb.contract_all(full, &modes)?);
    }

    let all: Vec<usize> = (0..order).collect();
    let pair_masks = if order >= 2 { tb.descend(full, 0, &all, 2)? } else { Vec::new() };

    let op_single = single_masks.iter().map(|&m| tb.node(m).clone()).collect();
    let mut op_pair = HashMap::with_capacity(pair_masks.len());
    for m in pair_masks {
        let modes = mask_modes(m);
        debug_assert_eq!(modes.len(), 2);
        op_pair.insert((modes[0], modes[1]), tb.node(m).clone());
    }

    Ok(PPState {
        anchors: anchors.to_vec(),
        op_single,
        op_pair,
        contractions: tb.contractions,
        evaluated: tb.evaluated,
    })
}

/// `Ỹ(n)` for the given current factors. Modes whose delta is exactly zero
/// contribute nothing, so with all deltas zero the result is `Y_p(n)` itself.
pub fn perturbed_ttmc<T: Scalar>(
    state: &PPState<T>,
    factors: &[Matrix<T>],
    n: usize,
) -> Result<DenseTensor<T>> {
    if factors.len() != state.anchors.len() {
        return Err(Error::arg("factor count does not match anchors"));
    }
    let mut y = state.op_single[n].clone();
    for (i, (f, a)) in factors.iter().zip(&state.anchors).enumerate() {
        if i == n {
            continue;
        }
        let delta = f.sub(a).map_err(|_| {
            Error::shape(Some(i), "current factor shape differs from its anchor")
        })?;
        if delta.data().iter().all(|&v| v == T::zero()) {
            continue;
        }
        let pair = state
            .pair(i, n)
            .ok_or_else(|| Error::arg(format!("missing pair operator ({i}, {n})")))?;
        let term = ttm_transposed(pair, &delta, i)?;
        for (dst, &v) in y.data_mut().iter_mut().zip(term.data()) {
            *dst = *dst + v;
        }
    }
    Ok(y)
}

/// One sweep driven by the perturbation operators instead of the full
/// tensor. The core is taken from the last mode's `Ỹ`, so it is itself an
/// approximation; callers re-project against the tensor when they need an
/// exact core.
pub fn pp_sweep<T: Scalar>(state: &PPState<T>, model: &TuckerModel<T>) -> Result<TuckerModel<T>> {
    let order = state.anchors.len();
    if model.factors().len() != order {
        return Err(Error::arg("model order does not match perturbation state"));
    }
    let mut factors = model.factors().to_vec();
    let mut last = None;
    for n in 0..order {
        let y = perturbed_ttmc(state, &factors, n)?;
        factors[n] = update_factor(&y, n, model.ranks()[n])?;
        last = Some(y);
    }
    let last = last.ok_or_else(|| Error::arg("empty model"))?;
    let core = ttm_transposed(&last, &factors[order - 1], order - 1)?;
    TuckerModel::new(core, factors, orthonormal_tol::<T>())
}
