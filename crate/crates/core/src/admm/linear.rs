//! Symmetric positive semidefinite solvers for the quadratic ADMM step.
//!
//! The system matrix `D'ᵀD' + ζ D_RᵀD_R` is banded under the axial-major
//! ordering (half-bandwidth `4n`), so the direct path is a banded `LDLᵀ`
//! factorization computed once per linearization point and reused for every
//! right-hand side. The iterative path is Jacobi-preconditioned conjugate
//! gradient.

use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Scalar};
use crate::sparse::SparseMatrix;

/// Banded `LDLᵀ` factorization of a symmetric positive semidefinite matrix.
///
/// Pivots that collapse below a relative tolerance are treated as exact
/// zeros; the matching unknowns are pinned to zero during substitution.
#[derive(Clone, Debug)]
pub struct BandedLdl<T> {
    n: usize,
    bw: usize,
    /// Row `i` stores `L[i][i-bw..i]` at `i*(bw+1) ..`, unit diagonal implied.
    lower: Vec<T>,
    diag: Vec<T>,
    zero_pivots: usize,
}

impl<T: Scalar> BandedLdl<T> {
    /// Storage needed for an `n x n` matrix with half-bandwidth `bw`.
    pub fn storage_len(n: usize, bw: usize) -> usize {
        n.saturating_mul(bw + 1)
    }

    pub fn factor(a: &SparseMatrix<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::InvalidArgument("banded factorization needs a square matrix".into()));
        }
        let bw = a.bandwidth();
        let stride = bw + 1;
        let mut lower = vec![T::zero(); Self::storage_len(n, bw)];
        let mut diag = vec![T::zero(); n];
        for (r, c, v) in a.iter() {
            if c <= r {
                lower[r * stride + (c + bw - r)] = v;
            }
        }
        let rel_tol = T::epsilon() * T::of(1e3);
        let mut zero_pivots = 0;
        let mut scratch = vec![T::zero(); stride];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row_i = i * stride;
            let a_ii = lower[row_i + bw];
            for j in lo..i {
                let klo = lo.max(j.saturating_sub(bw));
                // scratch[k - lo] holds L[i][k] * D[k] for k < j
                let s = {
                    let si = &scratch[klo - lo..j - lo];
                    let lj = &lower[j * stride + (klo + bw - j)..j * stride + bw];
                    dot(si, lj)
                };
                let t = lower[row_i + (j + bw - i)] - s;
                if diag[j] == T::zero() {
                    scratch[j - lo] = T::zero();
                    lower[row_i + (j + bw - i)] = T::zero();
                } else {
                    scratch[j - lo] = t;
                    lower[row_i + (j + bw - i)] = t / diag[j];
                }
            }
            let li = &lower[row_i + (lo + bw - i)..row_i + bw];
            let d = a_ii - dot(&scratch[..i - lo], li);
            if d <= rel_tol * a_ii.abs() || d <= T::min_positive_value() {
                diag[i] = T::zero();
                zero_pivots += 1;
            } else {
                diag[i] = d;
            }
        }
        Ok(Self { n, bw, lower, diag, zero_pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Number of pivots treated as zero (rank deficiency estimate).
    pub fn zero_pivots(&self) -> usize {
        self.zero_pivots
    }

    pub fn is_singular(&self) -> bool {
        self.zero_pivots > 0
    }

    /// Solves `A x = b`; components attached to zero pivots are set to zero.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (n, bw, stride) = (self.n, self.bw, self.bw + 1);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let li = &self.lower[i * stride + (lo + bw - i)..i * stride + bw];
            let s = dot(li, &x[lo..i]);
            x[i] -= s;
        }
        for (xi, &d) in x.iter_mut().zip(&self.diag) {
            *xi = if d == T::zero() { T::zero() } else { *xi / d };
        }
        for i in (0..n).rev() {
            let xi = x[i];
            if xi == T::zero() {
                continue;
            }
            let lo = i.saturating_sub(bw);
            let li = &self.lower[i * stride + (lo + bw - i)..i * stride + bw];
            for (xk, &l) in x[lo..i].iter_mut().zip(li) {
                *xk -= l * xi;
            }
        }
        x
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct CgSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: T,
}

/// Conjugate gradient on `A x = b` starting from `x0` (zero when `None`).
///
/// With `preconditioner = None` and a zero start on a consistent singular
/// system the iterates stay in the range of `A`, so the limit is the
/// minimum-norm solution.
pub fn conjugate_gradient<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    preconditioner: Option<&[T]>,
    tolerance: T,
    max_iterations: usize,
) -> Result<CgSolution<T>> {
    let n = b.len();
    let b_norm = norm2(b);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    if b_norm == T::zero() && x0.is_none() {
        return Ok(CgSolution { x, iterations: 0, relative_residual: T::zero() });
    }
    let scale = if b_norm == T::zero() { T::one() } else { b_norm };
    let ax = a.mul_vec(&x)?;
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let apply_m = |r: &[T]| -> Vec<T> {
        match preconditioner {
            Some(diag) => r
                .iter()
                .zip(diag)
                .map(|(&ri, &di)| if di > T::zero() { ri / di } else { ri })
                .collect(),
            None => r.to_vec(),
        }
    };
    let mut z = apply_m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm2(&r) / scale;
    let mut it = 0;
    while res > tolerance {
        if it == max_iterations {
            return Err(Error::NoConvergence { iterations: it, residual: res.to_f64_lossy() });
        }
        let ap = a.mul_vec(&p)?;
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            // Direction in the null space: nothing left to reduce along it.
            break;
        }
        let step = rz / pap;
        for k in 0..n {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        z = apply_m(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        res = norm2(&r) / scale;
        it += 1;
    }
    // Recompute the true residual; the recurrence drifts on long runs.
    let ax = a.mul_vec(&x)?;
    let true_res = norm2(&b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect::<Vec<_>>()) / scale;
    if true_res > tolerance * T::of(10.0) {
        return Err(Error::NoConvergence { iterations: it, residual: true_res.to_f64_lossy() });
    }
    Ok(CgSolution { x, iterations: it, relative_residual: true_res })
}

/// `‖A x - b‖₂`.
pub fn residual_norm<T: Scalar>(a: &SparseMatrix<T>, x: &[T], b: &[T]) -> Result<T> {
    let ax = a.mul_vec(x)?;
    Ok(norm2(&ax.iter().zip(b).map(|(&p, &q)| p - q).collect::<Vec<_>>()))
}
