//! Dense matrix kernel and reproducible random streams.

pub mod linalg;
mod matrix;
mod rng;

pub use linalg::{
    condition_number, inverse, log_abs_det, lu_det_inverse, singular_values, solve_spd, Cholesky, Lu,
    SymmetricEigen,
};
pub use matrix::{dot, Matrix};
pub use rng::{mix64, Draw, RngStream};
