//! Verification routines shared by the test suite and the `selftest`
//! command: adjoint identities, finite-difference derivative checks, Taylor
//! tests and small dense oracles.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::experiments::{force_ring, force_spots};
use crate::forward25d::Forward25;
use crate::forward2d::{NewtonOptions, NonlinearState, Problem2d};
use crate::inversion::{cgne, InversionConfig, LinearForward};
use crate::linalg::{dense, CgOptions};
use crate::material::{frobenius, DeformationState, Hyperelastic, Mat2, MaterialParams};
use crate::math::{abs, ln, sqrt};
use crate::mesh::{build_box_mesh, build_rect_mesh};

/// Seeded source of test vectors.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random deformation gradient with `det F > min_det`.
pub fn random_deformation(rng: &mut ChaCha8Rng, min_det: f64) -> Mat2 {
    loop {
        let f = [
            [1.0 + rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)],
            [rng.random_range(-0.8..0.8), 1.0 + rng.random_range(-0.8..0.8)],
        ];
        if f[0][0] * f[1][1] - f[0][1] * f[1][0] > min_det {
            return f;
        }
    }
}

/// Largest `|⟨Ax, y⟩ − ⟨x, A*y⟩| / (‖x‖ ‖y‖)` over random pairs.
pub fn adjoint_defect<A: LinearForward + ?Sized>(op: &A, pairs: usize, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x = random_vector(&mut r, op.param_dim());
        let y = random_vector(&mut r, op.data_dim());
        let lhs = op.data_inner(&op.apply(&x)?, &y);
        let rhs = op.param_inner(&x, &op.adjoint(&y)?);
        worst = worst.max(abs(lhs - rhs) / (op.param_norm(&x) * op.data_norm(&y)));
    }
    Ok(worst)
}

/// Relative mismatch between the stress and a central difference of the
/// energy, step `1e−5 |F|`.
pub fn stress_fd_defect<M: Hyperelastic + ?Sized>(m: &M, f: &Mat2) -> Result<f64> {
    let s = DeformationState::new(*f)?;
    let p = m.stress(&s);
    let h = 1e-5 * sqrt(frobenius(f, f));
    let mut diff = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut fp = *f;
            let mut fm = *f;
            fp[i][j] += h;
            fm[i][j] -= h;
            let d = (m.energy(&DeformationState::new(fp)?) - m.energy(&DeformationState::new(fm)?)) / (2.0 * h);
            diff += (d - p[i][j]) * (d - p[i][j]);
        }
    }
    Ok(sqrt(diff) / sqrt(frobenius(&p, &p)).max(f64::MIN_POSITIVE))
}

/// Relative mismatch between the tangent and a central difference of the
/// stress in direction `gv`, tested against `gw`.
pub fn tangent_fd_defect<M: Hyperelastic + ?Sized>(m: &M, f: &Mat2, gv: &Mat2, gw: &Mat2) -> Result<f64> {
    let s = DeformationState::new(*f)?;
    let t = m.tangent(&s, gv, gw);
    let h = 1e-5 * sqrt(frobenius(f, f)) / sqrt(frobenius(gv, gv));
    let shift = |sign: f64| -> Result<Mat2> {
        let mut g = *f;
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += sign * h * gv[i][j];
            }
        }
        Ok(m.stress(&DeformationState::new(g)?))
    };
    let (p, q) = (shift(1.0)?, shift(-1.0)?);
    let mut dp = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            dp[i][j] = (p[i][j] - q[i][j]) / (2.0 * h);
        }
    }
    let fd = frobenius(&dp, gw);
    let scale = sqrt(frobenius(&dp, &dp)) * sqrt(frobenius(gw, gw));
    Ok(abs(fd - t) / scale.max(f64::MIN_POSITIVE))
}

/// Observed orders `log(r_k / r_{k+1}) / log(ε_k / ε_{k+1})` of the Taylor
/// remainder `‖S(T + εh) − S(T) − ε S′(T)h‖`.
pub fn taylor_orders<M: Hyperelastic>(problem: &Problem2d<M>, state: &NonlinearState, h: &[f64], eps: &[f64], opts: &NewtonOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let dv = problem.frechet_apply(state, h)?;
    let base = state.u.coeffs();
    let mut rem = Vec::with_capacity(eps.len());
    for &e in eps {
        let t: Vec<f64> = state.load.iter().zip(h).map(|(a, b)| a + e * b).collect();
        let s = problem.solve_nonlinear(&t, opts, Some(base))?;
        let d: Vec<f64> = s.u.coeffs().iter().zip(base).zip(&dv).map(|((x, y), v)| x - y - e * v).collect();
        rem.push(sqrt(problem.mass().inner(&d, &d).max(0.0)));
    }
    let orders = rem
        .windows(2)
        .zip(eps.windows(2))
        .map(|(r, e)| ln(r[0] / r[1]) / ln(e[0] / e[1]))
        .collect();
    Ok((rem, orders))
}

/// A material whose tangent drops the sign of its volumetric term; used as a
/// negative control for the derivative checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptedTangent(pub MaterialParams);

impl Hyperelastic for CorruptedTangent {
    fn lame(&self) -> (f64, f64) {
        self.0.lame()
    }

    fn energy(&self, s: &DeformationState) -> f64 {
        self.0.energy(s)
    }

    fn stress(&self, s: &DeformationState) -> Mat2 {
        self.0.stress(s)
    }

    fn tangent(&self, s: &DeformationState, gv: &Mat2, gw: &Mat2) -> f64 {
        let fit = s.inv_t();
        let vol = self.0.lambda * s.det * s.det * (frobenius(&fit, gv) * frobenius(&fit, gw));
        self.0.tangent(s, gv, gw) - 2.0 * vol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub passed: bool,
    pub detail: String,
}

fn outcome(passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { passed, detail }
}

/// The self-test suite on coarse meshes, parameterized by the material so a
/// corrupted law can be substituted.
#[derive(Debug, Clone)]
pub struct SelfCheck<M> {
    material: M,
}

/// `(module, invariant)` of each check, in execution order.
pub const CHECKS: [(&str, &str); 8] = [
    ("forward25d", "adjoint identity"),
    ("material", "stress matches energy FD"),
    ("material", "tangent matches stress FD"),
    ("forward2d", "tangent at identity equals Hooke"),
    ("forward2d", "Frechet Taylor test"),
    ("forward2d", "Frechet self-adjointness in L2"),
    ("fem", "two-triangle dense oracle"),
    ("inversion", "CGNE on consistent data"),
];

impl<M: Hyperelastic + Clone> SelfCheck<M> {
    pub fn new(material: M) -> Self {
        Self { material }
    }

    pub fn len(&self) -> usize {
        CHECKS.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn params(&self) -> Result<MaterialParams> {
        let (mu, lambda) = self.material.lame();
        MaterialParams::new(mu, lambda)
    }

    fn problem(&self, n: usize) -> Result<Problem2d<M>> {
        let mesh = Arc::new(build_rect_mesh(2.0, n, n)?);
        Ok(Problem2d::new(mesh, 2, self.material.clone())?.with_cg(CgOptions::with_tol(1e-12)))
    }

    /// Runs check `index` of [`CHECKS`].
    pub fn run(&self, index: usize) -> CheckOutcome {
        match self.try_run(index) {
            Ok(o) => o,
            Err(e) => outcome(false, format!("error: {e}")),
        }
    }

    fn try_run(&self, index: usize) -> Result<CheckOutcome> {
        match index {
            0 => {
                let mesh = Arc::new(build_box_mesh(2.0, 1.0, 4, 4, 2)?);
                let op = Forward25::new(mesh, 1, self.params()?)?.with_cg(CgOptions::with_tol(1e-12));
                let d = adjoint_defect(&op, 5, 1)?;
                Ok(outcome(d <= 1e-10, format!("max defect {d:.2e}")))
            }
            1 | 2 => {
                let mut r = rng(2);
                let mut worst = 0.0f64;
                for _ in 0..50 {
                    let f = random_deformation(&mut r, 0.3);
                    let d = if index == 1 {
                        stress_fd_defect(&self.material, &f)?
                    } else {
                        let gv = [[r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)], [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]];
                        let gw = [[r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)], [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]];
                        tangent_fd_defect(&self.material, &f, &gv, &gw)?
                    };
                    worst = worst.max(d);
                }
                Ok(outcome(worst <= 1e-6, format!("max relative defect {worst:.2e}")))
            }
            3 => {
                let p = self.problem(4)?;
                let zero = vec![0.0; p.space().num_dofs()];
                let state = p.solve_nonlinear(&zero, &NewtonOptions::default(), None)?;
                let h = p.space().interpolate(|x| force_spots(100.0, x));
                let a = p.frechet_apply(&state, &h)?;
                let b = p.solve_linear(&h)?;
                let d = rel_diff(&a, &b);
                Ok(outcome(d <= 1e-9, format!("relative difference {d:.2e}")))
            }
            4 => {
                let p = self.problem(4)?;
                let opts = NewtonOptions {
                    newton_tol: 1e-13,
                    ..Default::default()
                };
                let t = p.space().interpolate(|x| force_ring(2e4, x));
                let h = p.space().interpolate(|x| force_spots(2e5, x));
                let state = p.solve_nonlinear(&t, &opts, None)?;
                let (_, orders) = taylor_orders(&p, &state, &h, &[1e-2, 1e-3, 1e-4], &opts)?;
                let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(outcome(min >= 1.9, format!("observed orders {orders:.3?}")))
            }
            5 => {
                let p = self.problem(4)?;
                let t = p.space().interpolate(|x| force_ring(1000.0, x));
                let state = p.solve_nonlinear(&t, &NewtonOptions::default(), None)?;
                let mut r = rng(5);
                let h = random_vector(&mut r, t.len());
                let g = random_vector(&mut r, t.len());
                let lhs = p.mass().inner(&p.frechet_apply(&state, &h)?, &g);
                let rhs = p.mass().inner(&h, &p.frechet_apply(&state, &g)?);
                let d = abs(lhs - rhs) / abs(lhs).max(abs(rhs));
                Ok(outcome(d <= 1e-8, format!("relative defect {d:.2e}")))
            }
            6 => {
                let d = two_triangle_oracle(&self.params()?)?;
                Ok(outcome(d <= 1e-12, format!("relative difference {d:.2e}")))
            }
            7 => {
                let p = self.problem(4)?;
                let op = crate::forward2d::LinearOperator2d {
                    problem: &p,
                    space: crate::inversion::ParamSpace::L2,
                };
                let t = p.space().interpolate(|x| force_ring(1000.0, x));
                let u = op.apply(&t)?;
                let un = op.data_norm(&u);
                let cfg = InversionConfig {
                    residual_floor: 1e-6 * un,
                    max_inner: 500,
                    ..Default::default()
                };
                let (_, rep) = cgne(&op, &u, &cfg, None)?;
                let rel = rep.final_residual() / un;
                Ok(outcome(rel <= 1e-6, format!("relative residual {rel:.2e} after {} iterations", rep.outer_iterations)))
            }
            _ => Ok(outcome(false, String::from("no such check"))),
        }
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let n: f64 = b.iter().map(|y| y * y).sum();
    sqrt(d) / sqrt(n).max(f64::MIN_POSITIVE)
}

/// Linear P2 solve on the two-triangle square against a dense solve of the
/// same Galerkin system restricted to the free dofs.
fn two_triangle_oracle(params: &MaterialParams) -> Result<f64> {
    let mesh = Arc::new(build_rect_mesh(1.0, 1, 1)?);
    let p = Problem2d::new(mesh, 2, *params)?.with_cg(CgOptions::with_tol(1e-14));
    let t = p.space().interpolate(|x| [1.0 + x[0], 2.0 - x[1] * x[1], 0.0]);
    let u = p.solve_linear(&t)?;
    let raw = crate::fem::assemble_raw(
        p.space(),
        &crate::fem::Elasticity {
            mu: params.mu,
            lambda: params.lambda,
        },
    );
    let f = p.mass().mul_vec(&t);
    let free: Vec<usize> = (0..u.len()).filter(|&i| !p.constrained()[i]).collect();
    let n = free.len();
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (r, &i) in free.iter().enumerate() {
        b[r] = f[i];
        for (c, &j) in free.iter().enumerate() {
            a[r * n + c] = raw.get(i, j);
        }
    }
    let x = dense::solve(n, &a, &b, 1)?;
    let mut full = vec![0.0; u.len()];
    for (r, &i) in free.iter().enumerate() {
        full[i] = x[r];
    }
    Ok(rel_diff(&u, &full))
}
