//! Symmetric eigensolver: Householder tridiagonalization followed by the
//! implicit QL algorithm (the EISPACK `tred2`/`tql2` pair).

use super::Matrix;
use crate::{Error, Result, Scalar};

const MAX_QL_ITERATIONS: usize = 64;

/// Eigenvalues in nonincreasing order with matching unit eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Each eigenvector is sign-fixed so that its largest-magnitude entry is
/// positive, which keeps factor matrices stable from one sweep to the next.
pub fn symmetric_eigen<T: Scalar>(g: &Matrix<T>) -> Result<EigenPairs<T>> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::arg(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            g.cols()
        )));
    }
    if g.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in symmetric matrix".into()));
    }

    let mut v = g.data().to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).expect("finite eigenvalues"));

    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = &v[src * n..(src + 1) * n];
        let sign = sign_of_dominant(col);
        for (r, &x) in col.iter().enumerate() {
            vectors.set(r, dst, sign * x);
        }
    }
    Ok(EigenPairs { values, vectors })
}

/// The `k` dominant eigenpairs of a symmetric matrix.
pub fn leading_eigvecs<T: Scalar>(g: &Matrix<T>, k: usize) -> Result<EigenPairs<T>> {
    if k == 0 || k > g.rows() {
        return Err(Error::arg(format!(
            "requested {k} eigenvectors of a {}x{} matrix",
            g.rows(),
            g.cols()
        )));
    }
    let mut full = symmetric_eigen(g)?;
    full.values.truncate(k);
    full.vectors = full.vectors.truncate_cols(k)?;
    Ok(full)
}

fn sign_of_dominant<T: Scalar>(col: &[T]) -> T {
    let mut best = T::zero();
    let mut sign = T::one();
    for &x in col {
        if x.abs() > best {
            best = x.abs();
            sign = if x < T::zero() { -T::one() } else { T::one() };
        }
    }
    sign
}

// `v` is column-major n x n: v[i][j] lives at v[i + j * n].
fn tred2<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let at = |i: usize, j: usize| i + j * n;
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in d.iter().take(i) {
            scale = scale + dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = zero;
                v[at(j, i)] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk = *dk / scale;
                h = h + *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }

            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g = g + v[at(k, j)] * d[k];
                    e[k] = e[k] + v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = zero;
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[at(k, j)] = v[at(k, j)] - (f * e[k] + g * d[k]);
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = zero;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g = g + v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] = v[at(k, j)] - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = zero;
    }
    if n > 0 {
        v[at(n - 1, n - 1)] = T::one();
        e[0] = zero;
    }
}

fn tql2<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let zero = T::zero();
    let one = T::one();
    let two = one + one;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::Numeric(format!(
                        "QL iteration did not converge for eigenvalue {l}"
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut lo[i * n..];
                    let col_i1 = &mut hi[..n];
                    for (a, b) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = zero;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("eigenvalue iteration produced NaN".into()));
    }
    Ok(())
}
