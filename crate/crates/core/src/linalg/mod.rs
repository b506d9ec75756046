//! Generic dense complex linear algebra: matrices, Hermitian
//! eigendecomposition, LU solves, and the matrix exponential.

pub mod cmatrix;
pub mod eig;
pub mod expm;
pub mod lu;

pub use cmatrix::{inner, vec_norm, CMatrix};
pub use eig::eig_hermitian;
pub use expm::expm;
