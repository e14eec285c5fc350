//! Synthetic force fields, the noise model, unit conversions, error metrics,
//! the linear/nonlinear comparison sweep and ingestion of gridded data.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fem::assemble::l2_norm_squared_where;
use crate::fem::{assemble_raw, FeFunction, FeSpace, Mass};
use crate::forward2d::{NewtonOptions, Problem2d};
use crate::linalg::CsrMatrix;
use crate::material::Hyperelastic;
use crate::math::{exp, sqrt};

fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        exp(-1.0 / (1.0 - r2))
    }
}

/// Ring pulling towards the origin:
/// `a · exp(−1/(1 − |x|²)) · (−x₁, −x₂, 0)` inside the unit disc.
pub fn force_ring(a: f64, x: &[f64]) -> [f64; 3] {
    let b = a * bump(x[0] * x[0] + x[1] * x[1]);
    if b == 0.0 {
        return [0.0; 3];
    }
    [-b * x[0], -b * x[1], 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSpot {
    pub center: [f64; 2],
    pub direction: [f64; 2],
    pub radius: f64,
}

/// The four spots of the cell-like test field.
pub const SPOTS: [ForceSpot; 4] = [
    ForceSpot {
        center: [-0.6, -0.2],
        direction: [1.0, -0.4],
        radius: 1.0,
    },
    ForceSpot {
        center: [0.3, 0.2],
        direction: [-1.0, 0.4],
        radius: 1.0,
    },
    ForceSpot {
        center: [0.6, -0.8],
        direction: [-0.2, 1.0],
        radius: 1.0,
    },
    ForceSpot {
        center: [-0.4, 1.2],
        direction: [0.2, -1.0],
        radius: 1.0,
    },
];

impl ForceSpot {
    pub fn eval(&self, b: f64, x: &[f64]) -> [f64; 3] {
        let dx = (x[0] - self.center[0]) / self.radius;
        let dy = (x[1] - self.center[1]) / self.radius;
        let s = b * bump(dx * dx + dy * dy);
        [s * self.direction[0], s * self.direction[1], 0.0]
    }
}

/// Sum of the spot contributions; overlapping spots add up.
pub fn force_spots(b: f64, x: &[f64]) -> [f64; 3] {
    let mut t = [0.0; 3];
    for spot in &SPOTS {
        let v = spot.eval(b, x);
        t[0] += v[0];
        t[1] += v[1];
    }
    t
}

/// `√(vᵀ M v)`
pub fn l2_norm(mass: &CsrMatrix, v: &[f64]) -> f64 {
    sqrt(mass.inner(v, v).max(0.0))
}

#[derive(Debug, Clone)]
pub struct NoisyData {
    pub field: FeFunction,
    pub delta: f64,
    pub level_percent: f64,
    pub seed: u64,
}

/// Adds white Gaussian noise to every coefficient, rescaled so that
/// `100 ‖noise‖ / ‖exact‖ = level_percent` in `L²`.
pub fn add_noise(exact: &FeFunction, level_percent: f64, seed: u64) -> Result<NoisyData> {
    let mass = assemble_raw(exact.space(), &Mass);
    add_noise_with(&mass, exact, level_percent, seed)
}

pub fn add_noise_with(mass: &CsrMatrix, exact: &FeFunction, level_percent: f64, seed: u64) -> Result<NoisyData> {
    if !(level_percent >= 0.0) {
        return Err(Error::InvalidArgument("noise level must be non-negative"));
    }
    if level_percent == 0.0 {
        return Ok(NoisyData {
            field: exact.clone(),
            delta: 0.0,
            level_percent: 0.0,
            seed,
        });
    }
    let exact_norm = l2_norm(mass, exact.coeffs());
    if exact_norm == 0.0 {
        return Err(Error::InvalidArgument("cannot scale noise relative to a zero field"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..exact.coeffs().len()).map(|_| rng.sample(StandardNormal)).collect();
    let delta = level_percent / 100.0 * exact_norm;
    let scale = delta / l2_norm(mass, &raw);
    let coeffs = exact.coeffs().iter().zip(&raw).map(|(u, n)| u + scale * n).collect();
    Ok(NoisyData {
        field: FeFunction::new(exact.space().clone(), coeffs)?,
        delta,
        level_percent,
        seed,
    })
}

/// `T = t / h`
pub fn traction_to_density(t: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("effective thickness must be positive"));
    }
    Ok(t.iter().map(|v| v / h).collect())
}

/// `t = h T`
pub fn density_to_traction(density: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("effective thickness must be positive"));
    }
    Ok(density.iter().map(|v| v * h).collect())
}

/// `100 ‖rec − truth‖ / ‖truth‖` in the `L²` norm given by `mass`.
pub fn relative_error_with(mass: &CsrMatrix, rec: &[f64], truth: &[f64]) -> Result<f64> {
    if rec.len() != truth.len() {
        return Err(Error::InvalidArgument("fields live on different spaces"));
    }
    let t = l2_norm(mass, truth);
    if t == 0.0 {
        return Err(Error::InvalidArgument("relative error against a zero field"));
    }
    let d: Vec<f64> = rec.iter().zip(truth).map(|(a, b)| a - b).collect();
    Ok(100.0 * l2_norm(mass, &d) / t)
}

pub fn relative_error(rec: &FeFunction, truth: &FeFunction) -> Result<f64> {
    if !Arc::ptr_eq(rec.space(), truth.space()) && rec.coeffs().len() != truth.coeffs().len() {
        return Err(Error::InvalidArgument("fields live on different spaces"));
    }
    relative_error_with(&assemble_raw(truth.space(), &Mass), rec.coeffs(), truth.coeffs())
}

/// `‖t‖ / ‖𝟙‖` where every component of `𝟙` equals one.
pub fn relative_force_norm_with(mass: &CsrMatrix, space: &FeSpace, t: &[f64]) -> f64 {
    let one = alloc::vec![1.0; space.num_dofs()];
    l2_norm(mass, t) / l2_norm(mass, &one)
}

pub fn relative_force_norm(t: &FeFunction) -> f64 {
    relative_force_norm_with(&assemble_raw(t.space(), &Mass), t.space(), t.coeffs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub magnitude: f64,
    pub relative_force_norm: f64,
    /// `100 ‖u_lin − u_nl‖ / ‖u_nl‖`
    pub discrepancy_percent: f64,
    pub homotopy_steps: usize,
    pub newton_iterations: usize,
    pub error: Option<Error>,
}

/// Linear against hyperelastic displacement for the ring field at each
/// magnitude.
pub fn compare_models<M: Hyperelastic>(magnitudes: &[f64], problem: &Problem2d<M>, opts: &NewtonOptions) -> Result<Vec<ComparisonRow>> {
    if magnitudes.is_empty() {
        return Err(Error::InvalidArgument("empty magnitude sweep"));
    }
    let space = problem.space();
    let unit = space.interpolate(|x| force_ring(1.0, x));
    let mut rows = Vec::with_capacity(magnitudes.len());
    for &a in magnitudes {
        let t: Vec<f64> = unit.iter().map(|v| a * v).collect();
        let mut row = ComparisonRow {
            magnitude: a,
            relative_force_norm: relative_force_norm_with(problem.mass(), space, &t),
            discrepancy_percent: 0.0,
            homotopy_steps: 0,
            newton_iterations: 0,
            error: None,
        };
        if a != 0.0 {
            let lin = problem.solve_linear(&t);
            let nl = problem.solve_nonlinear(&t, opts, None);
            match (lin, nl) {
                (Ok(ul), Ok(state)) => {
                    row.homotopy_steps = state.homotopy_steps;
                    row.newton_iterations = state.newton_iterations;
                    match relative_error_with(problem.mass(), &ul, state.u.coeffs()) {
                        Ok(d) => row.discrepancy_percent = d,
                        Err(e) => row.error = Some(e),
                    }
                }
                (Err(e), _) => row.error = Some(e),
                (_, Err(f)) => row.error = Some(f.error),
            }
            if row.error.is_some() {
                row.discrepancy_percent = f64::NAN;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Axis-aligned box in the `(x₁, x₂)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        x[0] >= self.lo[0] && x[0] <= self.hi[0] && x[1] >= self.lo[1] && x[1] <= self.hi[1]
    }
}

/// `δ̂ = ‖u‖_{L²(region)} · √(|Ω| / |region|)`, with both measures taken
/// from the same quadrature.
pub fn estimate_noise_from_margin(field: &FeFunction, region: &Region) -> Result<f64> {
    if !(region.hi[0] > region.lo[0] && region.hi[1] > region.lo[1]) {
        return Err(Error::InvalidArgument("margin region is empty"));
    }
    let (sum, measure) = l2_norm_squared_where(field.space(), field.coeffs(), |x| region.contains(x));
    if measure == 0.0 {
        return Err(Error::InvalidArgument("margin region contains no quadrature points"));
    }
    let (_, total) = l2_norm_squared_where(field.space(), field.coeffs(), |_| true);
    Ok(sqrt(sum * total / measure))
}

/// Vector samples on a tensor grid in two or three dimensions,
/// interpolated multilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    axes: Vec<Vec<f64>>,
    components: usize,
    /// Component-interleaved, `x` fastest.
    values: Vec<f64>,
}

fn unique_sorted(v: &mut Vec<f64>, tol: f64) {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= tol);
}

fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    if axis.len() == 1 {
        return (0, 0.0);
    }
    let x = x.clamp(axis[0], axis[axis.len() - 1]);
    let i = match axis.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => i.min(axis.len() - 2),
        Err(i) => i.saturating_sub(1).min(axis.len() - 2),
    };
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

impl GridData {
    /// Builds the grid from rows `(x₁, …, x_dim, v₁, …, v_components)` that
    /// must cover a full tensor grid exactly once, in any order.
    pub fn from_samples(dim: usize, components: usize, samples: &[Vec<f64>]) -> Result<Self> {
        if !(dim == 2 || dim == 3) || components == 0 {
            return Err(Error::InvalidArgument("grids are 2D or 3D with at least one component"));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples"));
        }
        if samples.iter().any(|s| s.len() != dim + components) {
            return Err(Error::InvalidArgument("sample rows have the wrong width"));
        }
        let span = samples
            .iter()
            .flat_map(|s| s[..dim].iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let tol = 1e-9 * span;
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|d| {
                let mut a: Vec<f64> = samples.iter().map(|s| s[d]).collect();
                unique_sorted(&mut a, tol);
                a
            })
            .collect();
        let count: usize = axes.iter().map(Vec::len).product();
        if count != samples.len() {
            return Err(Error::InvalidArgument("samples do not form a regular grid"));
        }
        let mut values = alloc::vec![f64::NAN; count * components];
        for s in samples {
            let mut index = 0;
            for d in (0..dim).rev() {
                let Some(i) = axes[d].iter().position(|a| (a - s[d]).abs() <= tol) else {
                    return Err(Error::InvalidArgument("samples do not form a regular grid"));
                };
                index = index * axes[d].len() + i;
            }
            let slot = &mut values[index * components..(index + 1) * components];
            if !slot[0].is_nan() {
                return Err(Error::InvalidArgument("duplicate grid sample"));
            }
            slot.copy_from_slice(&s[dim..]);
        }
        Ok(Self { axes, components, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn axis(&self, d: usize) -> &[f64] {
        &self.axes[d]
    }

    /// Multilinear interpolation; points outside the grid are clamped to it.
    pub fn sample(&self, x: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let cells: Vec<(usize, f64)> = (0..dim).map(|d| locate(&self.axes[d], x[d])).collect();
        let mut out = alloc::vec![0.0; self.components];
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut index = 0;
            for d in (0..dim).rev() {
                let (i, s) = cells[d];
                let up = (corner >> d) & 1 == 1;
                weight *= if up { s } else { 1.0 - s };
                let i = (i + usize::from(up)).min(self.axes[d].len() - 1);
                index = index * self.axes[d].len() + i;
            }
            if weight != 0.0 {
                for (o, v) in out.iter_mut().zip(&self.values[index * self.components..]) {
                    *o += weight * v;
                }
            }
        }
        out
    }

    /// Nodal interpolation onto a space of matching value dimension.
    pub fn interpolate_onto(&self, space: &FeSpace) -> Result<Vec<f64>> {
        if space.value_dim() != self.components {
            return Err(Error::InvalidArgument("grid components do not match the space"));
        }
        if space.mesh().dim() != self.dim() {
            return Err(Error::InvalidArgument("grid dimension does not match the mesh"));
        }
        Ok(space.interpolate(|x| {
            let v = self.sample(x);
            let mut out = [0.0; 3];
            out[..v.len()].copy_from_slice(&v);
            out
        }))
    }

    /// Whether the grid spans the box `[lo, hi]` up to `tol`.
    pub fn covers(&self, lo: &[f64], hi: &[f64], tol: f64) -> bool {
        self.axes
            .iter()
            .enumerate()
            .all(|(d, a)| a[0] <= lo[d] + tol && a[a.len() - 1] >= hi[d] - tol)
    }
}
