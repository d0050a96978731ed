//! Compressed-row sparse matrices, Krylov solvers and the column M-matrix check.

mod csr;
mod dense;
mod mmatrix;
mod solvers;

pub use csr::CsrMatrix;
pub use dense::{dense_inverse, dense_solve, DenseMatrix};
pub use mmatrix::{column_mmatrix_check, MMatrixReport};
pub use solvers::{solve_general, solve_spd, SolveStats, SolverOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) out of bounds for a {rows}x{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("matrix is singular to working precision (pivot {pivot} in column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("solver breakdown in {method} at iteration {iteration}")]
    Breakdown { method: &'static str, iteration: usize },
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
