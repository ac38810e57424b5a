//! Sparse storage and the saddle-point solver.

pub mod block;
pub mod cg;
pub mod sparse;

use thiserror::Error;

pub use block::{
    invert_mass_blocks, schur_complement, solve_block_system, BlockSystem, SchurSolver, SolverKind,
    SolverOptions,
};
pub use cg::{cg_solve, CgOutcome};
pub use sparse::CsrMatrix;

#[derive(Debug, Error, Clone)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mass block of element {block} is not positive definite")]
    NotPositiveDefinite { block: usize },
    #[error("entry ({row}, {col}) couples two mass blocks")]
    NotBlockDiagonal { row: usize, col: usize },
    #[error("CG did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        x: Vec<f64>,
    },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("block residuals {flux:.3e} / {mass:.3e} too large for data scale {scale:.3e}")]
    Residual { flux: f64, mass: f64, scale: f64 },
}
