//! Pure 2D forward maps on a clamped square: the linear Hooke solver, the
//! hyperelastic solver `S: T ↦ u`, its Fréchet derivative and adjoints.
//!
//! The nonlinear state minimizes `G(u) = ∫ W(I + ∇u) − ∫ T·u` over
//! displacements vanishing on the boundary.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::fem::assemble::{for_each_point, pattern, Tabulation};
use crate::fem::{assemble_bilinear, assemble_raw, Elasticity, FeFunction, FeSpace, Mass, VectorLaplacian};
use crate::forward25d::same_space;
use crate::inversion::{LinearForward, NonlinearForward, ParamSpace};
use crate::linalg::{solve_spd, solve_symmetric, CgOptions, CsrMatrix, SparsityPattern};
use crate::material::{DeformationState, Hyperelastic, Mat2, MaterialParams};
use crate::math::{dot, norm};
use crate::mesh::{CellKind, Mesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Relative tolerance on the residual, scaled by `1 + ‖M T‖`.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub homotopy_steps: usize,
    /// Retry with 10 homotopy steps when a single-step solve fails.
    pub auto_homotopy: bool,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 25,
            homotopy_steps: 1,
            auto_homotopy: true,
            max_halvings: 20,
        }
    }
}

/// Converged (or last) hyperelastic equilibrium together with the tangent
/// assembled there.
#[derive(Debug, Clone)]
pub struct NonlinearState {
    pub u: FeFunction,
    pub load: Vec<f64>,
    pub converged: bool,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub homotopy_steps: usize,
    tangent: CsrMatrix,
}

impl NonlinearState {
    pub fn tangent(&self) -> &CsrMatrix {
        &self.tangent
    }
}

/// A failed nonlinear solve, carrying the last state reached if any.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub error: Error,
    pub state: Option<NonlinearState>,
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl From<SolveFailure> for Error {
    fn from(f: SolveFailure) -> Self {
        f.error
    }
}

impl From<Error> for SolveFailure {
    fn from(error: Error) -> Self {
        Self { error, state: None }
    }
}

/// Per-mesh data of the 2D problem: matrices are assembled once and shared.
#[derive(Debug, Clone)]
pub struct Problem2d<M = MaterialParams> {
    material: M,
    space: Arc<FeSpace>,
    constrained: Vec<bool>,
    pattern: SparsityPattern,
    tab: Tabulation,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    laplacian: CsrMatrix,
    cg: CgOptions,
}

struct Evaluation {
    energy: f64,
    residual: Vec<f64>,
    magnitude: f64,
}

fn zero_at(mask: &[bool], v: &mut [f64]) {
    for (x, &c) in v.iter_mut().zip(mask) {
        if c {
            *x = 0.0;
        }
    }
}

impl<M: Hyperelastic> Problem2d<M> {
    pub fn new(mesh: Arc<Mesh>, order: usize, material: M) -> Result<Self> {
        if mesh.kind() != CellKind::Triangle && mesh.kind() != CellKind::Quadrilateral {
            return Err(Error::InvalidArgument("the 2D model needs a planar mesh"));
        }
        let space = Arc::new(FeSpace::new(mesh, order, 2)?);
        let (mu, lambda) = material.lame();
        let stiffness = assemble_bilinear(&space, &Elasticity { mu, lambda });
        let mass = assemble_raw(&space, &Mass);
        let laplacian = assemble_bilinear(&space, &VectorLaplacian);
        Ok(Self {
            material,
            constrained: space.constrained_dofs(),
            pattern: pattern(&space),
            tab: Tabulation::new(&space, 2 * order + 2),
            space,
            stiffness,
            mass,
            laplacian,
            cg: CgOptions::default(),
        })
    }

    pub fn with_cg(mut self, cg: CgOptions) -> Self {
        self.cg = cg;
        self
    }

    pub fn material(&self) -> &M {
        &self.material
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Hooke stiffness with identity rows on the boundary.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Vector Laplacian with identity rows on the boundary.
    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.space.num_dofs() {
            return Err(Error::InvalidArgument("coefficient length does not match the 2D space"));
        }
        Ok(())
    }

    /// `R M T`
    pub fn load(&self, t: &[f64]) -> Result<Vec<f64>> {
        self.check_len(t)?;
        let mut f = self.mass.mul_vec(t);
        zero_at(&self.constrained, &mut f);
        Ok(f)
    }

    fn solve_with(&self, k: &CsrMatrix, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        zero_at(&self.constrained, &mut rhs);
        Ok(solve_spd(k, &rhs, self.cg)?.0)
    }

    /// Solves `−div σ_lin(u) = T`, `u = 0` on the boundary.
    pub fn solve_linear(&self, t: &[f64]) -> Result<Vec<f64>> {
        let f = self.load(t)?;
        self.solve_with(&self.stiffness, f)
    }

    pub fn solve_linear2(&self, t: &FeFunction) -> Result<FeFunction> {
        if !same_space(t.space(), &self.space) {
            return Err(Error::InvalidArgument("force density does not live on the 2D space"));
        }
        FeFunction::new(self.space.clone(), self.solve_linear(t.coeffs())?)
    }

    /// Discrete `(−Δ)⁻¹ M v` with the Dirichlet vector Laplacian.
    pub fn riesz_h10(&self, v: &[f64]) -> Result<Vec<f64>> {
        let f = self.load(v)?;
        self.solve_with(&self.laplacian, f)
    }

    fn gradient_at(&self, u: &[f64], dofs: &[usize], grads: &[[f64; 3]]) -> Mat2 {
        let mut g = [[0.0; 2]; 2];
        for (i, gi) in grads.iter().enumerate() {
            for a in 0..2 {
                let c = u[dofs[2 * i + a]];
                g[a][0] += c * gi[0];
                g[a][1] += c * gi[1];
            }
        }
        g
    }

    /// Stored energy `∫ W(I + ∇u)` together with the internal force vector.
    fn evaluate(&self, u: &[f64], f_ext: &[f64]) -> Result<Evaluation> {
        let mut residual = vec![0.0; u.len()];
        let (mut energy, mut magnitude) = (0.0, 0.0);
        let mut failure = None;
        let mut dofs = Vec::new();
        let mut grads = Vec::new();
        for c in 0..self.space.mesh().num_cells() {
            self.space.cell_dofs(c, &mut dofs);
            for_each_point(&self.space, &self.tab, c, &dofs, &mut grads, |q| {
                if failure.is_some() {
                    return;
                }
                let g = self.gradient_at(u, q.dofs, q.grads);
                let s = match DeformationState::from_displacement_gradient(&g) {
                    Ok(s) => s,
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                };
                let w = self.material.energy(&s);
                energy += q.weight * w;
                magnitude += q.weight * w.abs();
                let p = self.material.stress(&s);
                for (i, gi) in q.grads.iter().enumerate() {
                    for a in 0..2 {
                        residual[q.dofs[2 * i + a]] += q.weight * (p[a][0] * gi[0] + p[a][1] * gi[1]);
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
        }
        let work = dot(u, f_ext);
        for (r, f) in residual.iter_mut().zip(f_ext) {
            *r -= f;
        }
        zero_at(&self.constrained, &mut residual);
        Ok(Evaluation {
            energy: energy - work,
            residual,
            magnitude: magnitude + work.abs(),
        })
    }

    /// `G(u) = ∫ W(I + ∇u) − uᵀ M T`
    pub fn energy(&self, u: &[f64], t: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        Ok(self.evaluate(u, &self.load(t)?)?.energy)
    }

    /// Weak residual `∫ σ(u) : ∇φ − T · φ` over all unconstrained test
    /// functions; zero at constrained dofs.
    pub fn residual(&self, u: &[f64], t: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        Ok(self.evaluate(u, &self.load(t)?)?.residual)
    }

    /// Consistent tangent at `u` with identity rows on the boundary.
    pub fn tangent(&self, u: &[f64]) -> Result<CsrMatrix> {
        self.check_len(u)?;
        let mut k = CsrMatrix::zeros(&self.pattern);
        let mut dofs = Vec::new();
        let mut grads = Vec::new();
        let mut local = Vec::new();
        let mut failure = None;
        for c in 0..self.space.mesh().num_cells() {
            self.space.cell_dofs(c, &mut dofs);
            let n = dofs.len();
            local.clear();
            local.resize(n * n, 0.0);
            for_each_point(&self.space, &self.tab, c, &dofs, &mut grads, |q| {
                if failure.is_some() {
                    return;
                }
                let g = self.gradient_at(u, q.dofs, q.grads);
                let s = match DeformationState::from_displacement_gradient(&g) {
                    Ok(s) => s,
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                };
                let cc = self.material.tangent_tensor(&s);
                let nb = q.grads.len();
                for i in 0..nb {
                    let gi = &q.grads[i];
                    for j in 0..nb {
                        let gj = &q.grads[j];
                        for a in 0..2 {
                            for b in 0..2 {
                                let mut v = 0.0;
                                for kk in 0..2 {
                                    for l in 0..2 {
                                        v += cc[b][l][a][kk] * gj[l] * gi[kk];
                                    }
                                }
                                local[(2 * i + a) * n + 2 * j + b] += q.weight * v;
                            }
                        }
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            for r in 0..n {
                for s in 0..n {
                    k.add(dofs[r], dofs[s], local[r * n + s]);
                }
            }
        }
        k.constrain(&self.constrained);
        Ok(k)
    }

    fn newton(&self, f_ext: &[f64], mut u: Vec<f64>, opts: &NewtonOptions) -> core::result::Result<(Vec<f64>, usize, f64), (Error, Vec<f64>, usize, f64)> {
        let scale = 1.0 + norm(f_ext);
        zero_at(&self.constrained, &mut u);
        let mut ev = match self.evaluate(&u, f_ext) {
            Ok(ev) => ev,
            Err(e) => return Err((e, u, 0, f64::INFINITY)),
        };
        let mut it = 0;
        loop {
            let rn = norm(&ev.residual);
            if rn <= opts.newton_tol * scale {
                return Ok((u, it, rn));
            }
            if it >= opts.max_newton {
                let e = Error::NotConverged {
                    solver: "newton",
                    iterations: it,
                    residual: rn / scale,
                };
                return Err((e, u, it, rn));
            }
            let step = self.tangent(&u).and_then(|k| {
                let rhs: Vec<f64> = ev.residual.iter().map(|r| -r).collect();
                Ok(solve_symmetric(&k, &rhs, self.cg)?.0)
            });
            let d = match step {
                Ok(d) => d,
                Err(e) => return Err((e, u, it, rn)),
            };
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(x, dx)| x + alpha * dx).collect();
                if let Ok(tv) = self.evaluate(&trial, f_ext) {
                    let slack = 1e-13 * ev.magnitude.max(tv.magnitude);
                    if tv.energy <= ev.energy + slack || norm(&tv.residual) < rn {
                        accepted = Some((trial, tv));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            it += 1;
            match accepted {
                Some((trial, tv)) => {
                    u = trial;
                    ev = tv;
                }
                None => {
                    let e = Error::NotConverged {
                        solver: "newton line search",
                        iterations: it,
                        residual: rn / scale,
                    };
                    return Err((e, u, it, rn));
                }
            }
        }
    }

    fn homotopy(
        &self,
        f_ext: &[f64],
        guess: Vec<f64>,
        steps: usize,
        opts: &NewtonOptions,
    ) -> core::result::Result<(Vec<f64>, usize, f64), (Error, Vec<f64>, usize, f64)> {
        let mut u = guess;
        let mut total = 0;
        let mut rn = 0.0;
        for k in 1..=steps {
            let s = k as f64 / steps as f64;
            let fk: Vec<f64> = f_ext.iter().map(|f| s * f).collect();
            let (v, it, r) = self.newton(&fk, u, opts).map_err(|(e, v, it, r)| (e, v, total + it, r))?;
            u = v;
            total += it;
            rn = r;
        }
        Ok((u, total, rn))
    }

    /// Hyperelastic equilibrium for the force density `t`.
    pub fn solve_nonlinear(&self, t: &[f64], opts: &NewtonOptions, initial_guess: Option<&[f64]>) -> core::result::Result<NonlinearState, SolveFailure> {
        let f_ext = self.load(t)?;
        let guess = match initial_guess {
            Some(g) => {
                self.check_len(g)?;
                g.to_vec()
            }
            None => vec![0.0; t.len()],
        };
        let steps = opts.homotopy_steps.max(1);
        let mut outcome = self.homotopy(&f_ext, guess.clone(), steps, opts);
        let mut used = steps;
        if outcome.is_err() && steps == 1 && opts.auto_homotopy {
            outcome = self.homotopy(&f_ext, guess, 10, opts);
            used = 10;
        }
        let (u, iterations, residual, error) = match outcome {
            Ok((u, it, r)) => (u, it, r, None),
            Err((e, u, it, r)) => (u, it, r, Some(e)),
        };
        let tangent = match self.tangent(&u) {
            Ok(k) => k,
            Err(e) => {
                return Err(SolveFailure {
                    error: error.unwrap_or(e),
                    state: None,
                })
            }
        };
        let state = NonlinearState {
            u: FeFunction::new(self.space.clone(), u)?,
            load: t.to_vec(),
            converged: error.is_none(),
            newton_iterations: iterations,
            residual_norm: residual,
            homotopy_steps: used,
            tangent,
        };
        match error {
            None => Ok(state),
            Some(error) => Err(SolveFailure {
                error,
                state: Some(state),
            }),
        }
    }

    pub fn solve_nonlinear2(&self, t: &FeFunction, opts: &NewtonOptions, initial_guess: Option<&FeFunction>) -> core::result::Result<NonlinearState, SolveFailure> {
        if !same_space(t.space(), &self.space) {
            return Err(Error::InvalidArgument("force density does not live on the 2D space").into());
        }
        self.solve_nonlinear(t.coeffs(), opts, initial_guess.map(|g| g.coeffs()))
    }

    /// `S′(T) h`: the tangent system at the state with right-hand side `M h`.
    pub fn frechet_apply(&self, state: &NonlinearState, h: &[f64]) -> Result<Vec<f64>> {
        if !state.converged {
            return Err(Error::InvalidArgument("Fréchet derivative needs a converged state"));
        }
        let f = self.load(h)?;
        Ok(solve_symmetric(&state.tangent, &f, self.cg)?.0)
    }

    /// Adjoint of `S′(T)` for the chosen parameter inner product; the data
    /// space always carries the `L²` product.
    pub fn frechet_adjoint_apply(&self, state: &NonlinearState, g: &[f64], space: ParamSpace) -> Result<Vec<f64>> {
        let v = self.frechet_apply(state, g)?;
        match space {
            ParamSpace::L2 => Ok(v),
            ParamSpace::H10 => self.riesz_h10(&v),
        }
    }

    pub fn param_inner(&self, space: ParamSpace, a: &[f64], b: &[f64]) -> f64 {
        match space {
            ParamSpace::L2 => self.mass.inner(a, b),
            ParamSpace::H10 => self.laplacian.inner(a, b),
        }
    }

    /// Zeroes boundary dofs when parameters must lie in `H¹₀`.
    pub fn project_param(&self, space: ParamSpace, v: &mut [f64]) {
        if space == ParamSpace::H10 {
            zero_at(&self.constrained, v);
        }
    }
}

/// The linear Hooke map as an operator between coefficient spaces.
#[derive(Debug, Clone, Copy)]
pub struct LinearOperator2d<'a, M = MaterialParams> {
    pub problem: &'a Problem2d<M>,
    pub space: ParamSpace,
}

impl<M: Hyperelastic> LinearForward for LinearOperator2d<'_, M> {
    fn param_dim(&self) -> usize {
        self.problem.space.num_dofs()
    }

    fn data_dim(&self) -> usize {
        self.problem.space.num_dofs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut x = x.to_vec();
        self.problem.project_param(self.space, &mut x);
        self.problem.solve_linear(&x)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        let v = self.problem.solve_linear(y)?;
        match self.space {
            ParamSpace::L2 => Ok(v),
            ParamSpace::H10 => self.problem.riesz_h10(&v),
        }
    }

    fn param_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.problem.param_inner(self.space, a, b)
    }

    fn data_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.problem.mass.inner(a, b)
    }
}

/// `S′(T)` at a fixed state.
#[derive(Debug, Clone)]
pub struct TangentOperator2d<'a, M = MaterialParams> {
    pub problem: &'a Problem2d<M>,
    pub state: NonlinearState,
    pub space: ParamSpace,
}

impl<M: Hyperelastic> LinearForward for TangentOperator2d<'_, M> {
    fn param_dim(&self) -> usize {
        self.problem.space.num_dofs()
    }

    fn data_dim(&self) -> usize {
        self.problem.space.num_dofs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut x = x.to_vec();
        self.problem.project_param(self.space, &mut x);
        self.problem.frechet_apply(&self.state, &x)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.problem.frechet_adjoint_apply(&self.state, y, self.space)
    }

    fn param_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.problem.param_inner(self.space, a, b)
    }

    fn data_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.problem.mass.inner(a, b)
    }
}

/// The hyperelastic map `S` for Newton-CG.
#[derive(Debug, Clone, Copy)]
pub struct NonlinearOperator2d<'a, M = MaterialParams> {
    pub problem: &'a Problem2d<M>,
    pub space: ParamSpace,
    pub options: NewtonOptions,
}

impl<M: Hyperelastic> NonlinearForward for NonlinearOperator2d<'_, M> {
    type Linearization<'b>
        = TangentOperator2d<'b, M>
    where
        Self: 'b;

    fn param_dim(&self) -> usize {
        self.problem.space.num_dofs()
    }

    fn data_dim(&self) -> usize {
        self.problem.space.num_dofs()
    }

    fn data_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.problem.mass.inner(a, b)
    }

    fn linearize<'b>(&'b self, x: &[f64], previous: Option<&TangentOperator2d<'b, M>>) -> Result<(Vec<f64>, TangentOperator2d<'b, M>)> {
        let mut x = x.to_vec();
        self.problem.project_param(self.space, &mut x);
        let guess = previous.map(|p| p.state.u.coeffs());
        let state = self.problem.solve_nonlinear(&x, &self.options, guess).map_err(Error::from)?;
        let u = state.u.coeffs().to_vec();
        Ok((
            u,
            TangentOperator2d {
                problem: self.problem,
                state,
                space: self.space,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;

    fn problem() -> Problem2d {
        let mesh = Arc::new(build_rect_mesh(2.0, 6, 6).unwrap());
        Problem2d::new(mesh, 2, MaterialParams::from_young_poisson(10_000.0, 0.45).unwrap()).unwrap()
    }

    fn load(p: &Problem2d, a: f64) -> Vec<f64> {
        p.space().interpolate(|x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 >= 1.0 {
                [0.0; 3]
            } else {
                let b = a * crate::math::exp(-1.0 / (1.0 - r2));
                [-b * x[0], -b * x[1], 0.0]
            }
        })
    }

    #[test]
    fn zero_load() {
        let p = problem();
        let t = vec![0.0; p.space().num_dofs()];
        assert!(p.solve_linear(&t).unwrap().iter().all(|&v| v == 0.0));
        let s = p.solve_nonlinear(&t, &NewtonOptions::default(), None).unwrap();
        assert_eq!(s.newton_iterations, 0);
        assert!(s.u.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_decreases_and_det_positive() {
        let p = problem();
        let t = load(&p, 5e4);
        let s = p.solve_nonlinear(&t, &NewtonOptions::default(), None).unwrap();
        assert!(s.converged);
        let zero = vec![0.0; t.len()];
        assert!(p.energy(s.u.coeffs(), &t).unwrap() <= p.energy(&zero, &t).unwrap());
    }

    #[test]
    fn residual_is_energy_gradient() {
        let p = problem();
        let t = load(&p, 2e4);
        let u = p.solve_linear(&t).unwrap();
        let r = p.residual(&u, &t).unwrap();
        let mut v = p.space().interpolate(|x| [x[1].sin(), (x[0] * x[1]).cos(), 0.0]);
        zero_at(p.constrained(), &mut v);
        let h = 1e-6;
        let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = (p.energy(&plus, &t).unwrap() - p.energy(&minus, &t).unwrap()) / (2.0 * h);
        let exact = dot(&r, &v);
        assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "{fd} {exact}");
    }

    #[test]
    fn tangent_at_identity_is_hooke() {
        let p = problem();
        let k = p.tangent(&vec![0.0; p.space().num_dofs()]).unwrap();
        let d: f64 = (0..k.nrows())
            .flat_map(|r| k.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - p.stiffness().get(r, c)).abs())
            .fold(0.0, f64::max);
        assert!(d <= 1e-9 * p.stiffness().max_abs());
    }
}
