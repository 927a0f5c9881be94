//! Dense linear algebra: matrix type, LU solves, symmetric eigendecomposition.

mod eigen;
mod matrix;

pub use eigen::SymmetricEigen;
pub use matrix::Matrix;

use crate::scalar::Scalar;
use crate::Error;

/// Relative pivot threshold below which a matrix is treated as singular.
const PIVOT_TOL: f64 = 1e-12;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Fails with [`Error::Singular`] when a pivot drops below `1e-12 · max|A|`.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, Error> {
    let cols = solve_many(a, &Matrix::from_vec(b.len(), 1, b.to_vec()))?;
    Ok(cols.column(0))
}

/// Solves `A X = B` for every column of `B`.
pub fn solve_many<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, Error> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(Error::Dimension(format!(
            "solve needs square A and matching B, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let k = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs();
    let tol = T::lit(PIVOT_TOL) * scale.max(T::min_positive_value());
    for col in 0..n {
        let (pivot_row, pivot_abs) =
            (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold(
                    (col, T::zero()),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if !(pivot_abs > tol) {
            return Err(Error::Singular);
        }
        if pivot_row != col {
            let (a_row, b_row) = lu.two_rows_mut(pivot_row, col);
            a_row.swap_with_slice(b_row);
            let (xa, xb) = x.two_rows_mut(pivot_row, col);
            xa.swap_with_slice(xb);
        }
        let pivot = lu[(col, col)];
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / pivot;
            if factor == T::zero() {
                continue;
            }
            let (src, dst) = lu.two_rows_mut(col, r);
            for c in col..n {
                dst[c] -= factor * src[c];
            }
            let (xs, xd) = x.two_rows_mut(col, r);
            for c in 0..k {
                xd[c] -= factor * xs[c];
            }
        }
    }
    for col in (0..n).rev() {
        let pivot = lu[(col, col)];
        for c in 0..k {
            let mut acc = x[(col, c)];
            for j in (col + 1)..n {
                acc -= lu[(col, j)] * x[(j, c)];
            }
            x[(col, c)] = acc / pivot;
        }
    }
    Ok(x)
}

pub fn inverse<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, Error> {
    solve_many(a, &Matrix::identity(a.rows()))
}

/// Minimum-norm solution of `A x = b` for symmetric positive-semidefinite `A`, discarding
/// eigen-directions with eigenvalue `≤ 1e-12 · λ_max`.
pub fn pseudo_solve_symmetric<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, Error> {
    let eig = SymmetricEigen::new(a)?;
    let cutoff = T::lit(PIVOT_TOL) * eig.max().abs();
    let n = a.rows();
    let mut x = vec![T::zero(); n];
    for (i, &lambda) in eig.values.iter().enumerate() {
        if lambda <= cutoff {
            continue;
        }
        let v = eig.vectors.column(i);
        let coef = crate::scalar::dot(&v, b) / lambda;
        crate::scalar::axpy(coef, &v, &mut x);
    }
    Ok(x)
}
