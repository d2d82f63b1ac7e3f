//! Small dense symmetric linear algebra, generic over the scalar type.
//!
//! The cyclic Jacobi eigensolver gives a deterministic path (fixed sweep
//! order, fixed rotation convention) so that fitted models are reproducible
//! bit-for-bit across runs.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigendecomposition of a symmetric matrix: `a = vectors * diag(values) * vectors^T`.
/// Eigenvectors are the columns of `vectors`.
pub struct SymEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

/// Cyclic Jacobi for symmetric matrices. Eigenpairs are returned sorted by
/// descending eigenvalue, each eigenvector scaled so its largest-magnitude
/// component is positive.
pub fn sym_eigen<T: Scalar>(a: &Array2<T>) -> Result<SymEigen<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::shape("eigendecomposition needs a square matrix"));
    }
    let mut m = a.clone();
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();
    let max_sweeps = 60;

    for _sweep in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[[i, j]] * m[[i, j]];
            }
        }
        let scale = m.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if off <= eps * eps * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let tau = (aqq - app) / (T::from_f64_lit(2.0) * apq);
                // smaller-magnitude root keeps rotations small
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = m[[src, src]];
        let col = v.column(src);
        // sign convention: largest-magnitude component positive
        let mut best = T::zero();
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        let sign = if best < T::zero() { -T::one() } else { T::one() };
        for k in 0..n {
            vectors[[k, dst]] = sign * col[k];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Cholesky factorization `a = l * l^T` of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: &Array2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::shape("cholesky needs a square matrix"));
    }
    let mut max_diag = T::zero();
    for i in 0..n {
        let v = a[[i, i]].abs();
        if v > max_diag {
            max_diag = v;
        }
    }
    let tol = T::epsilon() * max_diag * T::from_f64_lit(n.max(1) as f64);
    let mut l = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum = sum - l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= tol {
                    return Err(Error::numerical(format!(
                        "matrix not positive definite at pivot {i} (value {sum})"
                    )));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn solve_spd<T: Scalar>(a: &Array2<T>, b: &Array1<T>) -> Result<Array1<T>> {
    let l = cholesky(a)?;
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::shape("rhs length mismatch"));
    }
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum = sum - l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    Ok(x)
}

/// Solve `a x = b` for a general square matrix via Gaussian elimination with
/// partial pivoting. Used for filter initial-condition systems, which are not
/// symmetric.
pub fn solve_dense<T: Scalar>(a: &Array2<T>, b: &Array1<T>) -> Result<Array1<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::shape("solve_dense dimension mismatch"));
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[[r, col]].abs() > m[[piv, col]].abs() {
                piv = r;
            }
        }
        if m[[piv, col]].abs() == T::zero() {
            return Err(Error::numerical("singular matrix in solve_dense"));
        }
        if piv != col {
            for c in 0..n {
                let t = m[[col, c]];
                m[[col, c]] = m[[piv, c]];
                m[[piv, c]] = t;
            }
            let t = x[col];
            x[col] = x[piv];
            x[piv] = t;
        }
        for r in (col + 1)..n {
            let f = m[[r, col]] / m[[col, col]];
            if f == T::zero() {
                continue;
            }
            for c in col..n {
                m[[r, c]] = m[[r, c]] - f * m[[col, c]];
            }
            x[r] = x[r] - f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum = sum - m[[i, k]] * x[k];
        }
        x[i] = sum / m[[i, i]];
    }
    Ok(x)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Scalar>(a: &Array2<T>) -> Result<T> {
    let e = sym_eigen(a)?;
    Ok(e.values[e.values.len() - 1])
}
