//! Cyclic Jacobi eigensolver for complex Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot element with a diagonal
//! unitary, then applies the classic real Jacobi rotation. Problem sizes in
//! this crate are tiny (tens of rows), so robustness wins over speed.

use num_complex::Complex64;

use super::matrix::{CMatrix, Hermitian};

const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Sorted in descending order.
    pub values: Vec<f64>,
    /// Column `j` is the eigenvector for `values[j]`.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn vector(&self, j: usize) -> Vec<Complex64> {
        self.vectors.column(j)
    }

    /// U f(Λ) U†
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Hermitian {
        let n = self.values.len();
        let u = &self.vectors;
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let uik = u[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += uik * u[(j, k)].conj();
                }
            }
        }
        Hermitian::from_hermitian_part(&out)
    }

    pub fn reconstruct(&self) -> Hermitian {
        self.apply(|x| x)
    }
}

pub fn eig_hermitian(a: &Hermitian) -> EigenDecomposition {
    let n = a.dim();
    let mut m = a.matrix().clone();
    let mut v = CMatrix::identity(n);

    let scale = m.frobenius_norm();
    if n > 1 && scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    EigenDecomposition { values, vectors }
}

pub fn eigenvalues(a: &Hermitian) -> Vec<f64> {
    eig_hermitian(a).values
}

pub fn min_eigenvalue(a: &Hermitian) -> f64 {
    eig_hermitian(a).min()
}

fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let n = m.rows();
    let b = m[(p, q)];
    let babs = b.norm();
    if babs == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    if babs < 1e-300 || babs <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        m[(p, q)] = Complex64::new(0.0, 0.0);
        m[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    // Phase e^{-iθ} on column q makes the pivot real and positive.
    let phase = (b / babs).conj();
    let theta = (aqq - app) / (2.0 * babs);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let cs = 1.0 / (t * t + 1.0).sqrt();
    let sn = t * cs;

    // G = W P with W = diag(1, phase) on (p, q) and P the real rotation.
    let g_pp = Complex64::new(cs, 0.0);
    let g_pq = Complex64::new(sn, 0.0);
    let g_qp = phase * (-sn);
    let g_qq = phase * cs;

    // m <- m G (columns p, q)
    for i in 0..n {
        let mp = m[(i, p)];
        let mq = m[(i, q)];
        m[(i, p)] = mp * g_pp + mq * g_qp;
        m[(i, q)] = mp * g_pq + mq * g_qq;
    }
    // m <- G† m (rows p, q)
    for j in 0..n {
        let mp = m[(p, j)];
        let mq = m[(q, j)];
        m[(p, j)] = g_pp.conj() * mp + g_qp.conj() * mq;
        m[(q, j)] = g_pq.conj() * mp + g_qq.conj() * mq;
    }
    m[(p, q)] = Complex64::new(0.0, 0.0);
    m[(q, p)] = Complex64::new(0.0, 0.0);
    m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);

    for i in 0..n {
        let vp = v[(i, p)];
        let vq = v[(i, q)];
        v[(i, p)] = vp * g_pp + vq * g_qp;
        v[(i, q)] = vp * g_pq + vq * g_qq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::c;

    #[test]
    fn identity_spectrum() {
        let e = eig_hermitian(&Hermitian::identity(2));
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn pauli_z_spectrum() {
        let e = eig_hermitian(&Hermitian::diag(&[1.0, -1.0]));
        assert_eq!(e.values, vec![1.0, -1.0]);
    }

    #[test]
    fn pauli_x_eigenvectors() {
        let x = Hermitian::new(CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        let e = eig_hermitian(&x);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // eigenvectors up to a global phase
        let v0 = e.vector(0);
        let overlap = (v0[0].conj() * s + v0[1].conj() * s).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
        let v1 = e.vector(1);
        let overlap = (v1[0].conj() * s - v1[1].conj() * s).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_y_is_handled_with_complex_pivot() {
        let y = Hermitian::new(
            CMatrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]]).unwrap(),
        )
        .unwrap();
        let e = eig_hermitian(&y);
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] + 1.0).abs() < 1e-14);
        assert!(e.reconstruct().max_abs_diff(&y) < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let e = eig_hermitian(&Hermitian::zeros(3));
        assert_eq!(e.values, vec![0.0; 3]);
    }
}
