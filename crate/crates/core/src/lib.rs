//! Forward elasticity operators and iterative regularization for traction
//! force microscopy.
//!
//! The crate is `no_std` (with `alloc`). It contains the structured meshes,
//! Lagrange finite elements, the polyconvex hyperelastic material, the linear
//! 2.5D and pure 2D forward maps with their adjoints, and the CGNE /
//! truncated Newton-CG inversion drivers. File formats and the command line
//! live in the companion `tfm` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::result_large_err)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod experiments;
pub mod fem;
pub mod forward25d;
pub mod forward2d;
pub mod inversion;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod selfcheck;

mod math;

pub use error::{Error, Result};
pub use fem::{FeFunction, FeSpace};
pub use material::{EnergyOffset, MaterialParams};
pub use mesh::{BoundaryTag, Mesh};
