//! Pauli matrices and qubit helpers.

use super::matrix::{c, CMatrix, Hermitian};

/// σ_1, σ_2, σ_3 for `axis` 1, 2, 3; identity for 0.
pub fn sigma(axis: usize) -> Hermitian {
    let m = match axis {
        0 => Ok(CMatrix::identity(2)),
        1 => CMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]),
        2 => CMatrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]]),
        3 => CMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]),
        _ => panic!("Pauli axis must be 0..=3, got {axis}"),
    }
    .expect("static shape");
    Hermitian::from_hermitian_part(&m)
}

/// ½(1 + r·σ)
pub fn bloch(r: [f64; 3]) -> Hermitian {
    let mut out = sigma(0);
    for (k, &rk) in r.iter().enumerate() {
        out = out.add_scaled(&sigma(k + 1), rk);
    }
    out.scale(0.5)
}

/// Projectors onto the ±1 eigenspaces of σ_axis, ordered (+, −).
pub fn projectors(axis: usize) -> [Hermitian; 2] {
    let id = sigma(0);
    let s = sigma(axis);
    [id.add(&s).scale(0.5), id.sub(&s).scale(0.5)]
}
