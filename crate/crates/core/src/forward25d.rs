//! Linear elasticity on a cuboid driven by a traction on its top surface.
//!
//! With stiffness `K` (Dirichlet rows replaced by identity), trace mass
//! `M_Γ`, volume mass `M` and the trace extension `P`,
//!
//! * `Â t = K⁻¹ R P M_Γ t`
//! * `Â* w = Pᵀ K⁻¹ R M w`
//!
//! where `R` zeroes the clamped bottom dofs. `Â*` is the adjoint with respect
//! to `M_Γ` on tractions and `M` on displacements.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{assemble_bilinear, assemble_raw, Elasticity, FeFunction, FeSpace, Mass, Trace};
use crate::inversion::LinearForward;
use crate::linalg::{solve_spd, CgOptions, CsrMatrix};
use crate::material::MaterialParams;
use crate::mesh::{BoundaryTag, CellKind, Mesh};

#[derive(Debug, Clone)]
pub struct Forward25 {
    params: MaterialParams,
    space: Arc<FeSpace>,
    trace: Trace,
    constrained: Vec<bool>,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    trace_mass: CsrMatrix,
    cg: CgOptions,
}

impl Forward25 {
    pub fn new(mesh: Arc<Mesh>, order: usize, params: MaterialParams) -> Result<Self> {
        if mesh.kind() != CellKind::Hexahedron {
            return Err(Error::InvalidArgument("the 2.5D model needs a hexahedral mesh"));
        }
        let space = Arc::new(FeSpace::new(mesh, order, 3)?);
        let trace = Trace::new(&space, BoundaryTag::Top)?;
        let stiffness = assemble_bilinear(
            &space,
            &Elasticity {
                mu: params.mu,
                lambda: params.lambda,
            },
        );
        let mass = assemble_raw(&space, &Mass);
        let trace_mass = assemble_raw(trace.space(), &Mass);
        Ok(Self {
            params,
            constrained: space.constrained_dofs(),
            space,
            trace,
            stiffness,
            mass,
            trace_mass,
            cg: CgOptions::default(),
        })
    }

    pub fn with_cg(mut self, cg: CgOptions) -> Self {
        self.cg = cg;
        self
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    /// Displacement space on the cuboid.
    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Traction space on the top surface.
    pub fn trace_space(&self) -> &Arc<FeSpace> {
        self.trace.space()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn trace_mass(&self) -> &CsrMatrix {
        &self.trace_mass
    }

    fn solve(&self, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        for (v, &c) in rhs.iter_mut().zip(&self.constrained) {
            if c {
                *v = 0.0;
            }
        }
        Ok(solve_spd(&self.stiffness, &rhs, self.cg)?.0)
    }

    pub fn apply_coeffs(&self, t: &[f64]) -> Result<Vec<f64>> {
        if t.len() != self.trace_space().num_dofs() {
            return Err(Error::InvalidArgument("traction length does not match the top surface space"));
        }
        self.solve(self.trace.extend(&self.trace_mass.mul_vec(t)))
    }

    pub fn adjoint_coeffs(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.space.num_dofs() {
            return Err(Error::InvalidArgument("field length does not match the volume space"));
        }
        Ok(self.trace.restrict(&self.solve(self.mass.mul_vec(w))?))
    }

    /// Displacement caused by the traction `t` on the top surface.
    pub fn forward(&self, t: &FeFunction) -> Result<FeFunction> {
        if !same_space(t.space(), self.trace_space()) {
            return Err(Error::InvalidArgument("traction does not live on the TOP facet mesh"));
        }
        FeFunction::new(self.space.clone(), self.apply_coeffs(t.coeffs())?)
    }

    /// Top-surface trace of the adjoint state driven by `M w`.
    pub fn adjoint(&self, w: &FeFunction) -> Result<FeFunction> {
        if !same_space(w.space(), &self.space) {
            return Err(Error::InvalidArgument("field does not live on the volume space"));
        }
        FeFunction::new(self.trace_space().clone(), self.adjoint_coeffs(w.coeffs())?)
    }

    /// `a(u, u)` for a displacement vanishing on the bottom.
    pub fn strain_energy(&self, u: &[f64]) -> f64 {
        self.stiffness.inner(u, u)
    }
}

pub(crate) fn same_space(a: &Arc<FeSpace>, b: &Arc<FeSpace>) -> bool {
    Arc::ptr_eq(a, b)
        || (a.num_dofs() == b.num_dofs()
            && a.order() == b.order()
            && a.value_dim() == b.value_dim()
            && a.mesh().fingerprint() == b.mesh().fingerprint())
}

impl LinearForward for Forward25 {
    fn param_dim(&self) -> usize {
        self.trace_space().num_dofs()
    }

    fn data_dim(&self) -> usize {
        self.space.num_dofs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_coeffs(x)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.adjoint_coeffs(y)
    }

    fn param_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.trace_mass.inner(a, b)
    }

    fn data_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass.inner(a, b)
    }
}
