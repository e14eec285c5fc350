//! Sparse matrices, Jacobi-preconditioned CG and MINRES, and a small dense LU
//! used for building reference element bases.

mod cg;
pub mod dense;
mod minres;
mod sparse;

pub use cg::{solve_spd, CgOptions, CgStats};
pub use minres::{solve_minres, solve_symmetric};
pub use sparse::{CsrMatrix, SparsityPattern};
