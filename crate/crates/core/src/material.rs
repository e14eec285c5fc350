//! Constitutive laws: Lamé conversion, Hooke's law and the polyconvex
//! stored energy
//!
//! `W(F) = μ/2 |F|² + λ/4 (det F)² − (μ + λ/2) ln det F + c`
//!
//! with its first Piola–Kirchhoff stress and consistent tangent.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, ln, ln_1p, sqrt};

/// 2×2 matrix, row-major: `m[i][j]`.
pub type Mat2 = [[f64; 2]; 2];

/// States with `det F` at or below this value are rejected.
pub const DET_GUARD: f64 = 1e-8;

/// Growth exponents of the coercivity estimate (`|F|²` and `(det F)²`).
pub const GROWTH_EXPONENTS: (u32, u32) = (2, 2);

/// Additive constant of the stored energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyOffset {
    /// `−3μ/2 − λ/4`, which leaves `W(I) = −μ/2` in two dimensions.
    ThreeDimensional,
    /// `−μ − λ/4`, so that the natural state has zero energy.
    #[default]
    Consistent2d,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub young: Option<f64>,
    pub poisson: Option<f64>,
    pub offset: EnergyOffset,
}

/// `μ = E / (2(1 + ν))`, `λ = E ν / ((1 + ν)(1 − 2ν))`.
pub fn lame_from_young_poisson(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0) {
        return Err(Error::InvalidArgument("Young's modulus must be positive"));
    }
    if !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::InvalidArgument("Poisson ratio must lie in (-1, 0.5)"));
    }
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    Ok((mu, lambda))
}

impl MaterialParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidArgument("Lamé parameters must be positive"));
        }
        Ok(Self {
            mu,
            lambda,
            young: None,
            poisson: None,
            offset: EnergyOffset::default(),
        })
    }

    pub fn from_young_poisson(young: f64, poisson: f64) -> Result<Self> {
        let (mu, lambda) = lame_from_young_poisson(young, poisson)?;
        let mut p = Self::new(mu, lambda)?;
        p.young = Some(young);
        p.poisson = Some(poisson);
        Ok(p)
    }

    pub fn with_offset(mut self, offset: EnergyOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn energy_offset(&self) -> f64 {
        match self.offset {
            EnergyOffset::ThreeDimensional => -1.5 * self.mu - 0.25 * self.lambda,
            EnergyOffset::Consistent2d => -self.mu - 0.25 * self.lambda,
        }
    }

    /// Coercivity constant `C = min(μ/2, λ/4 − (μ + λ/2)/(2e))`; positive
    /// exactly when [`check_coercivity_condition`] holds.
    pub fn coercivity_constant(&self) -> f64 {
        let b = 0.25 * self.lambda - (self.mu + 0.5 * self.lambda) / (2.0 * core::f64::consts::E);
        (0.5 * self.mu).min(b)
    }
}

/// `λ > 2μ / (e − 1)`
pub fn check_coercivity_condition(params: &MaterialParams) -> bool {
    params.lambda > 2.0 * params.mu / (core::f64::consts::E - 1.0)
}

/// `σ = λ tr(ε) I + 2μ ε` with `ε = (∇u + ∇uᵀ)/2`, in 2 or 3 dimensions.
pub fn hooke_stress<const N: usize>(grad_u: &[[f64; N]; N], params: &MaterialParams) -> [[f64; N]; N] {
    let tr: f64 = (0..N).map(|i| grad_u[i][i]).sum();
    let mut s = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            s[i][j] = params.mu * (grad_u[i][j] + grad_u[j][i]);
        }
        s[i][i] += params.lambda * tr;
    }
    s
}

/// `F`, `det F` and `F⁻¹` for an admissible deformation gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub f: Mat2,
    /// `F − I`
    pub grad: Mat2,
    pub det: f64,
    pub inv: Mat2,
}

impl DeformationState {
    pub fn new(f: Mat2) -> Result<Self> {
        Self::build(f, [[f[0][0] - 1.0, f[0][1]], [f[1][0], f[1][1] - 1.0]])
    }

    /// `F = I + ∇u`
    pub fn from_displacement_gradient(g: &Mat2) -> Result<Self> {
        Self::build([[1.0 + g[0][0], g[0][1]], [g[1][0], 1.0 + g[1][1]]], *g)
    }

    fn build(f: Mat2, grad: Mat2) -> Result<Self> {
        let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
        if !(det > DET_GUARD) {
            return Err(Error::Domain { det });
        }
        let inv = [[f[1][1] / det, -f[0][1] / det], [-f[1][0] / det, f[0][0] / det]];
        Ok(Self { f, grad, det, inv })
    }

    /// `det F − 1 = tr g + det g`, free of cancellation for small `g`.
    pub fn det_minus_one(&self) -> f64 {
        let g = &self.grad;
        (g[0][0] + g[1][1]) + (g[0][0] * g[1][1] - g[0][1] * g[1][0])
    }

    /// `F^{-T}`
    pub fn inv_t(&self) -> Mat2 {
        transpose(&self.inv)
    }
}

/// A hyperelastic law in two dimensions.
pub trait Hyperelastic {
    /// Lamé pair of the linearization at the natural state.
    fn lame(&self) -> (f64, f64);
    fn energy(&self, s: &DeformationState) -> f64;
    /// First Piola–Kirchhoff stress `∂W/∂F`.
    fn stress(&self, s: &DeformationState) -> Mat2;
    /// `(∂σ/∂F [g_v]) : g_w`
    fn tangent(&self, s: &DeformationState, gv: &Mat2, gw: &Mat2) -> f64;

    /// The tangent as a 4th-order tensor `C[a][k][b][l]` contracted against
    /// unit directions `e_a ⊗ e_k` and `e_b ⊗ e_l`.
    fn tangent_tensor(&self, s: &DeformationState) -> [[[[f64; 2]; 2]; 2]; 2] {
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        for a in 0..2 {
            for k in 0..2 {
                let mut gv = [[0.0; 2]; 2];
                gv[a][k] = 1.0;
                for b in 0..2 {
                    for l in 0..2 {
                        let mut gw = [[0.0; 2]; 2];
                        gw[b][l] = 1.0;
                        c[a][k][b][l] = self.tangent(s, &gv, &gw);
                    }
                }
            }
        }
        c
    }
}

impl Hyperelastic for MaterialParams {
    fn lame(&self) -> (f64, f64) {
        (self.mu, self.lambda)
    }

    fn energy(&self, s: &DeformationState) -> f64 {
        // expanded around F = I: |F|² − 2 = 2 tr g + |g|², J² − 1 = (J − 1)(J + 1)
        let g = &s.grad;
        let frob = 2.0 * (g[0][0] + g[1][1]) + frobenius(g, g);
        let jm1 = s.det_minus_one();
        let d = self.mu + 0.5 * self.lambda;
        let shift = match self.offset {
            EnergyOffset::Consistent2d => 0.0,
            EnergyOffset::ThreeDimensional => -0.5 * self.mu,
        };
        0.5 * self.mu * frob + 0.25 * self.lambda * jm1 * (jm1 + 2.0) - d * ln_1p(jm1) + shift
    }

    fn stress(&self, s: &DeformationState) -> Mat2 {
        // μ (F − F^{-T}) + λ/2 (J² − 1) F^{-T}, which vanishes exactly at I
        let fit = s.inv_t();
        let c = 0.5 * self.lambda * (s.det * s.det - 1.0);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.mu * (s.f[i][j] - fit[i][j]) + c * fit[i][j];
            }
        }
        out
    }

    fn tangent(&self, s: &DeformationState, gv: &Mat2, gw: &Mat2) -> f64 {
        let j2 = s.det * s.det;
        let a = mul(&s.inv, gv);
        let b = mul(&s.inv, gw);
        // tr(F⁻¹ g_v F⁻¹ g_w), summed so that swapping g_v and g_w is exact
        let cross = (a[0][0] * b[0][0] + a[1][1] * b[1][1]) + (a[0][1] * b[1][0] + a[1][0] * b[0][1]);
        let fit = s.inv_t();
        let pv = frobenius(&fit, gv);
        let pw = frobenius(&fit, gw);
        let coeff = self.mu - 0.5 * self.lambda * (j2 - 1.0);
        self.mu * frobenius(gv, gw) + coeff * cross + self.lambda * j2 * (pv * pw)
    }
}

pub fn stored_energy(f: &Mat2, params: &MaterialParams) -> Result<f64> {
    Ok(params.energy(&DeformationState::new(*f)?))
}

pub fn piola_stress(f: &Mat2, params: &MaterialParams) -> Result<Mat2> {
    Ok(params.stress(&DeformationState::new(*f)?))
}

pub fn tangent_density(f: &Mat2, gv: &Mat2, gw: &Mat2, params: &MaterialParams) -> Result<f64> {
    Ok(params.tangent(&DeformationState::new(*f)?, gv, gw))
}

pub fn frobenius(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Symmetric square root of a symmetric positive semi-definite 2×2 matrix.
pub fn sqrt_spd(a: &Mat2) -> Result<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let tr = a[0][0] + a[1][1];
    if det < 0.0 || tr < 0.0 {
        return Err(Error::InvalidArgument("matrix is not positive semi-definite"));
    }
    let s = sqrt(det);
    let t = sqrt(tr + 2.0 * s);
    if t == 0.0 {
        return Ok([[0.0; 2]; 2]);
    }
    Ok([[(a[0][0] + s) / t, a[0][1] / t], [a[1][0] / t, (a[1][1] + s) / t]])
}

/// `|W(F) − λ/2 (tr E)² − μ tr E²|` along `E = s · direction`, with
/// `F = (I + 2E)^{1/2}`.
pub fn expansion_residuals(params: &MaterialParams, direction: &Mat2, scales: &[f64]) -> Result<Vec<f64>> {
    if params.offset != EnergyOffset::Consistent2d {
        return Err(Error::InvalidArgument("expansion check needs the 2D-consistent energy offset"));
    }
    scales
        .iter()
        .map(|&s| {
            let e = [[s * direction[0][0], s * direction[0][1]], [s * direction[1][0], s * direction[1][1]]];
            let c = [[1.0 + 2.0 * e[0][0], 2.0 * e[0][1]], [2.0 * e[1][0], 1.0 + 2.0 * e[1][1]]];
            let f = sqrt_spd(&c)?;
            let w = stored_energy(&f, params)?;
            let tr = e[0][0] + e[1][1];
            let tr_e2 = frobenius(&e, &transpose(&e));
            Ok(abs(w - 0.5 * params.lambda * tr * tr - params.mu * tr_e2))
        })
        .collect()
}

/// Least-squares slope of `log residual` against `log scale`.
pub fn expansion_order(params: &MaterialParams, direction: &Mat2, scales: &[f64]) -> Result<f64> {
    let r = expansion_residuals(params, direction, scales)?;
    if scales.len() < 2 || r.iter().any(|&v| !(v > 0.0)) || scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("degenerate expansion fit"));
    }
    let xs: Vec<f64> = scales.iter().map(|&s| ln(s)).collect();
    let ys: Vec<f64> = r.iter().map(|&v| ln(v)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate expansion fit"));
    }
    Ok(sxy / sxx)
}

/// `x ↦ (λ/4) x² − (μ + λ/2) ln x`, the volumetric part of the energy.
pub fn volumetric_energy(params: &MaterialParams, x: f64) -> f64 {
    0.25 * params.lambda * x * x - (params.mu + 0.5 * params.lambda) * ln(x)
}
