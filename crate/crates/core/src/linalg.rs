//! Small dense linear algebra over [`Scalar`] values.
//!
//! Matrices are row-major `Vec<Vec<T>>`. The generic inverse is used for jet
//! matrices (metric and symplectic inverses whose derivatives must propagate);
//! plain `f64` checks such as definiteness go through `nalgebra`.

use nalgebra::DMatrix;

use crate::jets::Scalar;

pub type Matrix<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub pivot: f64,
}

/// Gauss-Jordan inverse with partial pivoting on the real parts.
///
/// Fails when a pivot falls below `rel_tol` times the largest entry.
pub fn invert<T: Scalar>(m: &Matrix<T>, rel_tol: f64) -> Result<Matrix<T>, Singular> {
    let n = m.len();
    let scale = m.iter().flatten().map(|x| x.value().abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Singular { pivot: 0.0 });
    }
    let mut a = m.clone();
    let mut inv: Matrix<T> = (0..n)
        .map(|i| (0..n).map(|j| T::from_f64(if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for col in 0..n {
        let (best, mag) = (col..n)
            .map(|r| (r, a[r][col].value().abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= rel_tol * scale {
            return Err(Singular { pivot: mag });
        }
        a.swap(col, best);
        inv.swap(col, best);
        let p = a[col][col].recip().map_err(|_| Singular { pivot: mag })?;
        for j in 0..n {
            a[col][j] = a[col][j].clone() * p.clone();
            inv[col][j] = inv[col][j].clone() * p.clone();
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                let mut x = a[r][j].clone();
                x.add_mul_assign(&-f.clone(), &a[col][j]);
                a[r][j] = x;
                let mut y = inv[r][j].clone();
                y.add_mul_assign(&-f.clone(), &inv[col][j]);
                inv[r][j] = y;
            }
        }
    }
    Ok(inv)
}

pub fn values<T: Scalar>(m: &Matrix<T>) -> Matrix<f64> {
    m.iter().map(|row| row.iter().map(Scalar::value).collect()).collect()
}

pub fn to_dmatrix(m: &Matrix<f64>) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, m.first().map_or(0, Vec::len), |i, j| m[i][j]).resize(n, n, 0.0)
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Matrix<f64>) -> f64 {
    let d = to_dmatrix(m);
    let sym = (&d + d.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn is_positive_definite(m: &Matrix<f64>) -> bool {
    let d = to_dmatrix(m);
    d.cholesky().is_some()
}

pub fn identity_deviation(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    let n = a.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| a[i][k] * b[k][j]).sum();
            worst = worst.max((s - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}
