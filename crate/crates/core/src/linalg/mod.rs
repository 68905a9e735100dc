//! Dense complex linear algebra kernel.

mod eigen;
mod lu;
mod matrix;

pub use eigen::{eig_general, eig_hermitian, hermitian_function, Spectrum, HERMITIAN_TOL};
pub use lu::{solve_linear, Lu};
pub use matrix::{kron, kron_all, partial_trace, ComplexMatrix, C64, I, ONE, ZERO};
