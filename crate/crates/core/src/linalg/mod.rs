//! Dense complex linear algebra used throughout the crate.

mod decomp;
mod eigen;
mod matrix;
pub mod pauli;
pub mod tolerance;

pub use decomp::{
    determinant, determinant_real, Cholesky, partial_trace_a, partial_transpose, singular_values,
    solve_real, trace_norm, Side, SVD_DEFLATION,
};
pub use eigen::{eig_hermitian, eigenvalues, min_eigenvalue, EigenDecomposition};
pub use matrix::{c, CMatrix, Hermitian, HERMITIAN_TOL, ONE, ZERO};
pub use tolerance::Tolerances;
