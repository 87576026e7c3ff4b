use num_complex::Complex64;

use super::eigen::eig_hermitian;
use super::matrix::{CMatrix, Hermitian, ONE, ZERO};
use crate::error::{Error, Result};

/// Eigenvalues of M†M below this are treated as exact zeros.
pub const SVD_DEFLATION: f64 = 1e-12;

/// Determinant by LU factorisation with partial pivoting.
pub fn determinant(m: &CMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut det = ONE;
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
            .expect("non-empty column");
        if a[(pivot, k)] == ZERO {
            return Ok(ZERO);
        }
        if pivot != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            det = -det;
        }
        let akk = a[(k, k)];
        det *= akk;
        for i in k + 1..n {
            let f = a[(i, k)] / akk;
            if f == ZERO {
                continue;
            }
            for j in k + 1..n {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
        }
    }
    Ok(det)
}

/// Determinant of a real matrix given as rows.
pub fn determinant_real(rows: &[Vec<f64>]) -> Result<f64> {
    let m = CMatrix::from_real_rows(rows)?;
    Ok(determinant(&m)?.re)
}

/// Singular values in descending order, from the spectrum of M†M.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let gram = Hermitian::from_hermitian_part(&(&m.adjoint() * m));
    let mut values: Vec<f64> = eig_hermitian(&gram)
        .values
        .into_iter()
        .map(|l| if l < SVD_DEFLATION { 0.0 } else { l.sqrt() })
        .collect();
    values.truncate(m.rows().min(m.cols()));
    values
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Transpose on one tensor factor of a (dA·dB)-dimensional operator.
pub fn partial_transpose(a: &Hermitian, dims: (usize, usize), side: Side) -> Result<Hermitian> {
    let (da, db) = dims;
    if a.dim() != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: a.dim(),
            context: "partial transpose",
        });
    }
    let m = a.matrix();
    let out = CMatrix::from_fn(da * db, da * db, |row, col| {
        let (i, k) = (row / db, row % db);
        let (j, l) = (col / db, col % db);
        match side {
            Side::A => m[(j * db + k, i * db + l)],
            Side::B => m[(i * db + l, j * db + k)],
        }
    });
    Ok(Hermitian::from_hermitian_part(&out))
}

/// Partial trace over the first factor.
pub fn partial_trace_a(a: &CMatrix, dims: (usize, usize)) -> Result<CMatrix> {
    let (da, db) = dims;
    if a.rows() != da * db || a.cols() != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: a.rows(),
            context: "partial trace",
        });
    }
    Ok(CMatrix::from_fn(db, db, |k, l| {
        (0..da).map(|i| a[(i * db + k, i * db + l)]).sum()
    }))
}

/// Solves a dense real system by Gaussian elimination with partial pivoting.
pub fn solve_real(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::validation("solve_real: shape mismatch"));
    }
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .expect("non-empty");
        if a[pivot][k].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        a.swap(k, pivot);
        b.swap(k, pivot);
        let (top, bottom) = a.split_at_mut(k + 1);
        let rk = &top[k];
        for (off, ri) in bottom.iter_mut().enumerate() {
            let f = ri[k] / rk[k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                ri[j] -= f * rk[j];
            }
            b[k + 1 + off] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Ok(x)
}

/// Cholesky factor of a symmetric positive definite real matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    /// Lower triangle, row-major.
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::validation("cholesky: shape mismatch"));
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Singular);
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen::min_eigenvalue;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn det_identity() {
        let d = determinant(&CMatrix::identity(4)).unwrap();
        assert!((d - ONE).norm() < 1e-15);
    }

    #[test]
    fn det_vienna_diagonal() {
        let s6 = 1.0 / 6f64.sqrt();
        let d = determinant(&CMatrix::diag_real(&[FRAC_1_SQRT_2, -s6, -s6, -s6])).unwrap();
        let expected = -1.0 / (12.0 * 3f64.sqrt());
        assert!((d.re - expected).abs() < 1e-15);
        assert!((expected + 0.0481125).abs() < 1e-7);
    }

    #[test]
    fn det_requires_square() {
        assert!(determinant(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn det_with_pivoting() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((determinant(&m).unwrap().re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn svd_examples() {
        assert_eq!(singular_values(&CMatrix::zeros(3, 3)), vec![0.0; 3]);
        let s6 = 1.0 / 6f64.sqrt();
        let sv = singular_values(&CMatrix::diag_real(&[FRAC_1_SQRT_2, -s6, -s6, -s6]));
        let want = [FRAC_1_SQRT_2, s6, s6, s6];
        for (a, b) in sv.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let shift = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(singular_values(&shift), vec![1.0, 0.0]);
    }

    #[test]
    fn singlet_partial_transpose_min_eigenvalue() {
        let s = FRAC_1_SQRT_2;
        let psi = vec![ZERO, Complex64::new(s, 0.0), Complex64::new(-s, 0.0), ZERO];
        let rho = Hermitian::projector(&psi);
        let pt = partial_transpose(&rho, (2, 2), Side::A).unwrap();
        assert!((min_eigenvalue(&pt) + 0.5).abs() < 1e-14);
        let back = partial_transpose(&pt, (2, 2), Side::A).unwrap();
        assert_eq!(back, rho);
        assert!(partial_transpose(&rho, (3, 2), Side::A).is_err());
    }

    #[test]
    fn partial_transpose_of_product() {
        let p = Hermitian::new(
            CMatrix::from_rows(&[
                vec![Complex64::new(0.7, 0.0), Complex64::new(0.1, 0.2)],
                vec![Complex64::new(0.1, -0.2), Complex64::new(0.3, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let q = Hermitian::diag(&[0.25, 0.75]);
        let pt = partial_transpose(&p.kron(&q), (2, 2), Side::A).unwrap();
        let want = p.matrix().transpose().kron(q.matrix());
        assert!(pt.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let ch = Cholesky::factor(&a, 3).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-13);
        }
        assert!(Cholesky::factor(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
    }

    #[test]
    fn real_solver() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_real(a, vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_real(vec![vec![0.0]], vec![1.0]).is_err());
    }
}
