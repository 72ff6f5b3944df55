use rayon::prelude::*;

use super::{DenseTensor, Matrix};
use crate::{Error, Result, Scalar};

// Below this many multiply-adds a mode product runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

fn check_mode<T: Scalar>(t: &DenseTensor<T>, mode: usize) -> Result<()> {
    if mode >= t.order() {
        return Err(Error::arg(format!(
            "mode {mode} out of range for order-{} tensor",
            t.order()
        )));
    }
    Ok(())
}

/// `(prod dims[..mode], dims[mode], prod dims[mode+1..])`
fn split_dims(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, dims[mode], right)
}

/// Mode-`mode` unfolding: an `s_mode x prod(others)` matrix whose columns are
/// the mode fibers, remaining indices ordered lowest mode fastest.
pub fn unfold<T: Scalar>(t: &DenseTensor<T>, mode: usize) -> Result<Matrix<T>> {
    check_mode(t, mode)?;
    let (left, s, right) = split_dims(t.dims(), mode);
    let src = t.data();
    let mut out = vec![T::zero(); src.len()];
    for jr in 0..right {
        for i in 0..s {
            let base = left * (i + s * jr);
            for jl in 0..left {
                out[i + s * (jl + left * jr)] = src[base + jl];
            }
        }
    }
    Matrix::new(s, left * right, out)
}

/// Inverse of [`unfold`].
pub fn fold<T: Scalar>(m: &Matrix<T>, mode: usize, dims: &[usize]) -> Result<DenseTensor<T>> {
    if mode >= dims.len() {
        return Err(Error::arg(format!("mode {mode} out of range for dims {dims:?}")));
    }
    let (left, s, right) = split_dims(dims, mode);
    if m.rows() != s || m.cols() != left * right {
        return Err(Error::shape(
            Some(mode),
            format!(
                "{}x{} matrix cannot fold into {dims:?}",
                m.rows(),
                m.cols()
            ),
        ));
    }
    let src = m.data();
    let mut out = vec![T::zero(); src.len()];
    for jr in 0..right {
        for i in 0..s {
            let base = left * (i + s * jr);
            for jl in 0..left {
                out[base + jl] = src[i + s * (jl + left * jr)];
            }
        }
    }
    DenseTensor::new(dims.to_vec(), out)
}

fn mode_product<T: Scalar>(
    t: &DenseTensor<T>,
    m: &Matrix<T>,
    mode: usize,
    transposed: bool,
) -> DenseTensor<T> {
    let (left, s, right) = split_dims(t.dims(), mode);
    let out_rows = if transposed { m.cols() } else { m.rows() };
    let mut dims = t.dims().to_vec();
    dims[mode] = out_rows;
    let mut out = vec![T::zero(); left * out_rows * right];

    let kernel = |src: &[T], dst: &mut [T]| {
        if left == 1 {
            if transposed {
                for (r, d) in dst.iter_mut().enumerate() {
                    *d = m.col(r).iter().zip(src).map(|(&a, &x)| a * x).sum();
                }
            } else {
                for (k, &x) in src.iter().enumerate() {
                    for (d, &a) in dst.iter_mut().zip(m.col(k)) {
                        *d = *d + a * x;
                    }
                }
            }
            return;
        }
        for k in 0..s {
            let slab = &src[k * left..(k + 1) * left];
            for r in 0..out_rows {
                let a = if transposed { m.get(k, r) } else { m.get(r, k) };
                if a == T::zero() {
                    continue;
                }
                let dst_slab = &mut dst[r * left..(r + 1) * left];
                for (d, &x) in dst_slab.iter_mut().zip(slab) {
                    *d = *d + a * x;
                }
            }
        }
    };

    let in_chunk = left * s;
    let out_chunk = left * out_rows;
    if right > 1 && t.len() * out_rows >= PAR_THRESHOLD {
        out.par_chunks_mut(out_chunk)
            .zip(t.data().par_chunks(in_chunk))
            .for_each(|(dst, src)| kernel(src, dst));
    } else {
        for (dst, src) in out.chunks_mut(out_chunk).zip(t.data().chunks(in_chunk)) {
            kernel(src, dst);
        }
    }
    DenseTensor::new(dims, out).expect("mode product preserves shape invariants")
}

/// Mode-n product `t ×_mode m`; `m` is `r x s_mode`.
pub fn ttm<T: Scalar>(t: &DenseTensor<T>, m: &Matrix<T>, mode: usize) -> Result<DenseTensor<T>> {
    check_mode(t, mode)?;
    if m.cols() != t.dims()[mode] {
        return Err(Error::shape(
            Some(mode),
            format!(
                "matrix has {} columns, tensor mode size is {}",
                m.cols(),
                t.dims()[mode]
            ),
        ));
    }
    Ok(mode_product(t, m, mode, false))
}

/// `t ×_mode mᵀ`; `m` is `s_mode x r`. Avoids materializing the transpose.
pub fn ttm_transposed<T: Scalar>(
    t: &DenseTensor<T>,
    m: &Matrix<T>,
    mode: usize,
) -> Result<DenseTensor<T>> {
    check_mode(t, mode)?;
    if m.rows() != t.dims()[mode] {
        return Err(Error::shape(
            Some(mode),
            format!(
                "matrix has {} rows, tensor mode size is {}",
                m.rows(),
                t.dims()[mode]
            ),
        ));
    }
    Ok(mode_product(t, m, mode, true))
}

/// Contract `t` with `factors[i]ᵀ` along every mode `i != skip`, in ascending
/// mode order. `factors[skip]` is not read.
pub fn ttmc<T: Scalar>(
    t: &DenseTensor<T>,
    factors: &[Matrix<T>],
    skip: Option<usize>,
) -> Result<DenseTensor<T>> {
    if factors.len() != t.order() {
        return Err(Error::arg(format!(
            "{} factors for an order-{} tensor",
            factors.len(),
            t.order()
        )));
    }
    if let Some(s) = skip {
        check_mode(t, s)?;
    }
    for (i, f) in factors.iter().enumerate() {
        if Some(i) != skip && f.rows() != t.dims()[i] {
            return Err(Error::shape(
                Some(i),
                format!("factor has {} rows, tensor mode size is {}", f.rows(), t.dims()[i]),
            ));
        }
    }
    let mut cur: Option<DenseTensor<T>> = None;
    for (i, f) in factors.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let src = cur.as_ref().unwrap_or(t);
        cur = Some(mode_product(src, f, i, true));
    }
    Ok(cur.unwrap_or_else(|| t.clone()))
}

/// `m mᵀ`, computed on the upper triangle and mirrored so the result is
/// exactly symmetric.
pub fn gram<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let n = m.rows();
    let mut g = vec![T::zero(); n * n];
    for c in 0..m.cols() {
        let col = m.col(c);
        for j in 0..n {
            let v = col[j];
            if v == T::zero() {
                continue;
            }
            let gcol = &mut g[j * n..j * n + j + 1];
            for (gi, &x) in gcol.iter_mut().zip(&col[..=j]) {
                *gi = *gi + x * v;
            }
        }
    }
    mirror_upper(&mut g, n);
    Matrix::new(n, n, g).expect("square gram matrix")
}

/// Gram matrix of the mode-`mode` unfolding without materializing it.
pub fn mode_gram<T: Scalar>(t: &DenseTensor<T>, mode: usize) -> Result<Matrix<T>> {
    check_mode(t, mode)?;
    let (left, s, right) = split_dims(t.dims(), mode);
    if left == 1 {
        let as_matrix = Matrix::new(s, right, t.data().to_vec())?;
        return Ok(gram(&as_matrix));
    }
    let mut g = vec![T::zero(); s * s];
    for slab in t.data().chunks(left * s).take(right) {
        for b in 0..s {
            let cb = &slab[b * left..(b + 1) * left];
            for a in 0..=b {
                let ca = &slab[a * left..(a + 1) * left];
                let dot: T = ca.iter().zip(cb).map(|(&x, &y)| x * y).sum();
                g[a + b * s] = g[a + b * s] + dot;
            }
        }
    }
    mirror_upper(&mut g, s);
    Matrix::new(s, s, g)
}

fn mirror_upper<T: Copy>(g: &mut [T], n: usize) {
    for j in 0..n {
        for i in j + 1..n {
            g[i + j * n] = g[j + i * n];
        }
    }
}
