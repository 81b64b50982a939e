//! Sparse and small-dense linear algebra.

mod dense;
mod lu;
mod matrix_market;
mod sparse;

pub use dense::{dense_spectral_radius, DenseMatrix, DENSE_ORACLE_LIMIT};
pub use lu::{reverse_cuthill_mckee, sparse_lu_solve, LuFactor};
pub use matrix_market::{load_matrix_market, parse_matrix_market, save_matrix_market, write_matrix_market};
pub use sparse::{axpy, dot, norm2, SparseMatrix};
