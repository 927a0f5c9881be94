//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::Matrix;
use crate::scalar::Scalar;
use crate::Error;

/// Eigendecomposition `A = V · diag(values) · Vᵀ`, eigenvalues sorted ascending and
/// eigenvectors stored as the matching columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

impl<T: Scalar> SymmetricEigen<T> {
    /// Runs cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
    /// `tol · ‖A‖_F`, with `tol = max(1e-12, 16ε)`.
    pub fn new(a: &Matrix<T>) -> Result<Self, Error> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "eigensolver needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let scale = a.max_abs().max(T::one());
        let asym = a.asymmetry().unwrap_or(T::zero());
        if asym > T::lit(1e-10) * scale {
            return Err(Error::NotSymmetric(asym.to_f64_lossy()));
        }
        let n = a.rows();
        let mut m = a.clone();
        // symmetrize exactly so rotations see one value per pair
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = (m[(i, j)] + m[(j, i)]) / T::lit(2.0);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        let mut v = Matrix::identity(n);
        let norm = m.frobenius_norm();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        let target = tol * norm;

        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            if off_diagonal_norm(&m) <= target || norm == T::zero() {
                break;
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let tau = (aqq - app) / (T::lit(2.0) * apq);
                    let t = if tau.abs() > T::lit(1e100) {
                        T::one() / (T::lit(2.0) * tau)
                    } else if tau >= T::zero() {
                        T::one() / (tau + (T::one() + tau * tau).sqrt())
                    } else {
                        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s);
                }
            }
        }
        if off_diagonal_norm(&m) > target && norm != T::zero() {
            return Err(Error::NoConvergence(format!(
                "Jacobi did not converge in {MAX_SWEEPS} sweeps"
            )));
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            m[(i, i)]
                .partial_cmp(&m[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok(Self {
            values,
            vectors,
            sweeps,
        })
    }

    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or(T::zero())
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or(T::zero())
    }

    /// `V · diag(values) · Vᵀ`
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for r in 0..n {
            for c in 0..n {
                scaled[(r, c)] *= self.values[c];
            }
        }
        scaled.matmul(&self.vectors.transpose())
    }
}

fn off_diagonal_norm<T: Scalar>(m: &Matrix<T>) -> T {
    let n = m.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for (j, &x) in m.row(i).iter().enumerate() {
            if i != j {
                acc += x * x;
            }
        }
    }
    acc.sqrt()
}

// A ← Jᵀ A J and V ← V J for the plane rotation J in (p, q).
fn rotate<T: Scalar>(m: &mut Matrix<T>, v: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = m.rows();
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = c * akp - s * akq;
        m[(k, q)] = s * akp + c * akq;
    }
    {
        let (row_p, row_q) = m.two_rows_mut(p, q);
        for k in 0..n {
            let apk = row_p[k];
            let aqk = row_q[k];
            row_p[k] = c * apk - s * aqk;
            row_q[k] = s * apk + c * aqk;
        }
    }
    m[(p, q)] = T::zero();
    m[(q, p)] = T::zero();
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
