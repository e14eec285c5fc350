//! Lagrange finite elements on the structured meshes: reference elements,
//! quadrature, spaces, assembly and surface traces.

pub mod assemble;
pub mod element;
pub mod geometry;
pub mod quadrature;
mod space;
mod trace;

pub use assemble::{
    assemble_bilinear, assemble_load, assemble_raw, BilinearForm, Elasticity, LoadKind, Mass, QuadPoint,
    VectorLaplacian,
};
pub use space::{FeFunction, FeSpace};
pub use trace::{trace_on, Trace};
