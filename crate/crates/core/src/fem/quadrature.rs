//! Gauss–Legendre rules on the reference cells.

use alloc::vec::Vec;

use crate::math::{abs, cos};
use crate::mesh::CellKind;

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { t } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * pn - pm) / (t * t - 1.0);
            let dt = pn / dp;
            t -= dt;
            if abs(dt) < 1e-16 {
                break;
            }
        }
        x.push(0.5 * (1.0 - t));
        w.push(1.0 / ((1.0 - t * t) * dp * dp));
    }
    (x, w)
}

/// Tensor rule on the unit interval, square or cube.
pub fn tensor(dim: usize, n: usize) -> Quadrature {
    let (x, w) = gauss_legendre(n);
    let count = |d: usize| if dim > d { n } else { 1 };
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in 0..count(2) {
        for j in 0..count(1) {
            for i in 0..n {
                let mut p = [x[i], 0.0, 0.0];
                let mut wt = w[i];
                if dim > 1 {
                    p[1] = x[j];
                    wt *= w[j];
                }
                if dim > 2 {
                    p[2] = x[k];
                    wt *= w[k];
                }
                points.push(p);
                weights.push(wt);
            }
        }
    }
    Quadrature { points, weights }
}

pub fn hexahedron(n: usize) -> Quadrature {
    tensor(3, n)
}

/// Collapsed (Duffy) rule on the unit triangle, exact for degree `2n − 2`.
pub fn triangle(n: usize) -> Quadrature {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let u = x[i];
            points.push([u, x[j] * (1.0 - u), 0.0]);
            weights.push(w[i] * w[j] * (1.0 - u));
        }
    }
    Quadrature { points, weights }
}

/// Smallest rule on `kind` integrating polynomials of total (simplex) or
/// per-variable (tensor cells) degree `degree` exactly.
pub fn for_degree(kind: CellKind, degree: usize) -> Quadrature {
    match kind {
        CellKind::Triangle => triangle(degree / 2 + 1),
        CellKind::Quadrilateral => tensor(2, degree / 2 + 1),
        CellKind::Hexahedron => tensor(3, degree / 2 + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(q: &Quadrature, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        q.points.iter().zip(&q.weights).map(|(p, w)| w * f(p)).sum()
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        // ∫_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).product::<u32>().max(1) as f64;
        for n in 1..6 {
            let q = triangle(n);
            for a in 0..=(2 * n - 2) {
                for b in 0..=(2 * n - 2 - a) {
                    let exact = fact(a as u32) * fact(b as u32) / fact((a + b + 2) as u32);
                    let s = integrate(&q, |p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    assert!((s - exact).abs() < 1e-14, "n={n} a={a} b={b}");
                }
            }
        }
    }
}
