//! Galerkin assembly of bilinear forms and load vectors.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::element::reference_vertices;
use super::geometry::CellGeometry;
use super::quadrature::{self, Quadrature};
use super::FeSpace;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SparsityPattern};
use crate::math::{abs, sqrt};
use crate::mesh::{BoundaryTag, CellKind};

/// Basis data of one cell at one quadrature point.
#[derive(Debug)]
pub struct QuadPoint<'a> {
    pub cell: usize,
    pub x: [f64; 3],
    /// Quadrature weight times `|det J|`.
    pub weight: f64,
    pub values: &'a [f64],
    /// Physical gradients of the scalar basis functions.
    pub grads: &'a [[f64; 3]],
    /// Global dofs of the cell, `local_node · value_dim + component`.
    pub dofs: &'a [usize],
}

/// A symmetric or non-symmetric bilinear integrand `a(u, v)` acting on
/// vector-valued basis functions `φ_i e_a`.
pub trait BilinearForm {
    /// Polynomial degree to add on top of `2 · order` when picking the
    /// quadrature rule.
    fn extra_degree(&self) -> usize {
        0
    }

    /// Adds `weight · a(φ_j e_b, φ_i e_a)` into `local[(i·vd + a)·n + j·vd + b]`.
    fn add(&self, q: &QuadPoint<'_>, value_dim: usize, local: &mut [f64]);
}

/// `∫ u · v`
#[derive(Debug, Clone, Copy, Default)]
pub struct Mass;

/// `∫ ∇u : ∇v`
#[derive(Debug, Clone, Copy, Default)]
pub struct VectorLaplacian;

/// `∫ 2μ ε(u) : ε(v) + λ div u div v`
#[derive(Debug, Clone, Copy)]
pub struct Elasticity {
    pub mu: f64,
    pub lambda: f64,
}

impl BilinearForm for Mass {
    fn add(&self, q: &QuadPoint<'_>, vd: usize, local: &mut [f64]) {
        let n = q.values.len() * vd;
        for (i, vi) in q.values.iter().enumerate() {
            for (j, vj) in q.values.iter().enumerate() {
                let m = q.weight * vi * vj;
                for a in 0..vd {
                    local[(i * vd + a) * n + j * vd + a] += m;
                }
            }
        }
    }
}

impl BilinearForm for VectorLaplacian {
    fn add(&self, q: &QuadPoint<'_>, vd: usize, local: &mut [f64]) {
        let n = q.values.len() * vd;
        for (i, gi) in q.grads.iter().enumerate() {
            for (j, gj) in q.grads.iter().enumerate() {
                let s = q.weight * (gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2]);
                for a in 0..vd {
                    local[(i * vd + a) * n + j * vd + a] += s;
                }
            }
        }
    }
}

impl BilinearForm for Elasticity {
    fn add(&self, q: &QuadPoint<'_>, vd: usize, local: &mut [f64]) {
        let n = q.values.len() * vd;
        for (i, gi) in q.grads.iter().enumerate() {
            for (j, gj) in q.grads.iter().enumerate() {
                let dot: f64 = (0..vd).map(|d| gi[d] * gj[d]).sum();
                for a in 0..vd {
                    for b in 0..vd {
                        let mut s = self.mu * gi[b] * gj[a] + self.lambda * gi[a] * gj[b];
                        if a == b {
                            s += self.mu * dot;
                        }
                        local[(i * vd + a) * n + j * vd + b] += q.weight * s;
                    }
                }
            }
        }
    }
}

/// Basis tabulated at quadrature points of the reference cell.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub quadrature: Quadrature,
    pub values: Vec<Vec<f64>>,
    pub ref_grads: Vec<Vec<[f64; 3]>>,
}

impl Tabulation {
    pub fn new(space: &FeSpace, degree: usize) -> Self {
        let quadrature = quadrature::for_degree(space.mesh().kind(), degree);
        Self::at(space, quadrature)
    }

    pub fn at(space: &FeSpace, quadrature: Quadrature) -> Self {
        let n = space.nodes_per_cell();
        let mut values = Vec::with_capacity(quadrature.len());
        let mut ref_grads = Vec::with_capacity(quadrature.len());
        for p in &quadrature.points {
            let mut v = vec![0.0; n];
            let mut g = vec![[0.0; 3]; n];
            space.element().eval(p, &mut v, &mut g);
            values.push(v);
            ref_grads.push(g);
        }
        Self {
            quadrature,
            values,
            ref_grads,
        }
    }
}

/// Iterates the quadrature points of one cell.
pub fn for_each_point(
    space: &FeSpace,
    tab: &Tabulation,
    cell: usize,
    dofs: &[usize],
    grads: &mut Vec<[f64; 3]>,
    mut f: impl FnMut(&QuadPoint<'_>),
) {
    let geo = CellGeometry::new(space.mesh(), cell);
    let affine = geo.is_affine();
    let mut jac = geo.jacobian_at(&tab.quadrature.points[0]);
    for (qi, p) in tab.quadrature.points.iter().enumerate() {
        if !affine && qi > 0 {
            jac = geo.jacobian_at(p);
        }
        let det = jac.det();
        let jit = jac.inverse_transpose();
        grads.clear();
        for g in &tab.ref_grads[qi] {
            let mut pg = [0.0; 3];
            for r in 0..jac.dim {
                for c in 0..jac.dim {
                    pg[r] += jit[r][c] * g[c];
                }
            }
            grads.push(pg);
        }
        f(&QuadPoint {
            cell,
            x: geo.map(p),
            weight: tab.quadrature.weights[qi] * abs(det),
            values: &tab.values[qi],
            grads,
            dofs,
        });
    }
}

/// Node-coupling pattern expanded to dofs.
pub fn pattern(space: &FeSpace) -> SparsityPattern {
    let mut adj = vec![BTreeSet::new(); space.num_nodes()];
    for c in 0..space.mesh().num_cells() {
        let nodes = space.cell_nodes(c);
        for &a in nodes {
            adj[a].extend(nodes.iter().copied());
        }
    }
    let vd = space.value_dim();
    let mut rows = Vec::with_capacity(space.num_dofs());
    for set in &adj {
        let cols: BTreeSet<usize> = set.iter().flat_map(|&n| (0..vd).map(move |b| n * vd + b)).collect();
        for _ in 0..vd {
            rows.push(cols.clone());
        }
    }
    SparsityPattern::from_rows(space.num_dofs(), &rows)
}

fn local_matrix<F: BilinearForm + ?Sized>(space: &FeSpace, tab: &Tabulation, form: &F, cell: usize) -> (Vec<usize>, Vec<f64>) {
    let mut dofs = Vec::new();
    space.cell_dofs(cell, &mut dofs);
    let n = dofs.len();
    let mut local = vec![0.0; n * n];
    let mut grads = Vec::with_capacity(space.nodes_per_cell());
    for_each_point(space, tab, cell, &dofs, &mut grads, |q| {
        form.add(q, space.value_dim(), &mut local)
    });
    (dofs, local)
}

fn scatter(matrix: &mut CsrMatrix, dofs: &[usize], local: &[f64]) {
    let n = dofs.len();
    for (r, &gr) in dofs.iter().enumerate() {
        for (c, &gc) in dofs.iter().enumerate() {
            let v = local[r * n + c];
            if v != 0.0 {
                let k = matrix.find(gr, gc).expect("pattern");
                matrix.values_mut()[k] += v;
            }
        }
    }
}

/// Assembles `form` into `matrix` (whose pattern must come from
/// [`pattern`]), overwriting previous values. No constraints are applied.
pub fn assemble_into<F: BilinearForm + Sync + ?Sized>(space: &FeSpace, form: &F, matrix: &mut CsrMatrix) {
    let tab = Tabulation::new(space, 2 * space.order() + form.extra_degree());
    matrix.values_mut().iter_mut().for_each(|v| *v = 0.0);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let locals: Vec<_> = (0..space.mesh().num_cells())
            .into_par_iter()
            .map(|c| local_matrix(space, &tab, form, c))
            .collect();
        for (dofs, local) in &locals {
            scatter(matrix, dofs, local);
        }
    }
    #[cfg(not(feature = "parallel"))]
    for c in 0..space.mesh().num_cells() {
        let (dofs, local) = local_matrix(space, &tab, form, c);
        scatter(matrix, &dofs, &local);
    }
}

/// Serial assembly; the reference for the parallel path.
pub fn assemble_serial<F: BilinearForm + ?Sized>(space: &FeSpace, form: &F) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(&pattern(space));
    let tab = Tabulation::new(space, 2 * space.order() + form.extra_degree());
    for c in 0..space.mesh().num_cells() {
        let (dofs, local) = local_matrix(space, &tab, form, c);
        scatter(&mut m, &dofs, &local);
    }
    m
}

/// Galerkin matrix without boundary constraints.
pub fn assemble_raw<F: BilinearForm + Sync + ?Sized>(space: &FeSpace, form: &F) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(&pattern(space));
    assemble_into(space, form, &mut m);
    m
}

/// Galerkin matrix with the rows and columns of constrained dofs replaced by
/// identity rows.
pub fn assemble_bilinear<F: BilinearForm + Sync + ?Sized>(space: &FeSpace, form: &F) -> CsrMatrix {
    let mut m = assemble_raw(space, form);
    m.constrain(&space.constrained_dofs());
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Domain,
    Boundary(BoundaryTag),
}

/// Load vector `∫ f · v` over the domain or over the facets carrying a tag,
/// with zeros at constrained dofs.
pub fn assemble_load(space: &FeSpace, kind: LoadKind, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Result<Vec<f64>> {
    let vd = space.value_dim();
    let mut out = vec![0.0; space.num_dofs()];
    let mut dofs = Vec::new();
    match kind {
        LoadKind::Domain => {
            let tab = Tabulation::new(space, 2 * space.order() + 2);
            let mut grads = Vec::new();
            for c in 0..space.mesh().num_cells() {
                space.cell_dofs(c, &mut dofs);
                for_each_point(space, &tab, c, &dofs, &mut grads, |q| {
                    let fx = f(&q.x);
                    for (i, v) in q.values.iter().enumerate() {
                        for a in 0..vd {
                            out[q.dofs[i * vd + a]] += q.weight * v * fx[a];
                        }
                    }
                });
            }
        }
        LoadKind::Boundary(tag) => {
            let mesh = space.mesh();
            if !mesh.has_tag(tag) {
                return Err(Error::UnknownTag);
            }
            let elem = space.element();
            let nloc = elem.num_nodes();
            let refv = reference_vertices(mesh.kind());
            let facet_dim = mesh.dim() - 1;
            let rule = quadrature::tensor(facet_dim.max(1), space.order() + 2);
            let mut vals = vec![0.0; nloc];
            let mut g = vec![[0.0; 3]; nloc];
            for facet in mesh.boundary_facets().iter().filter(|f| f.tag == tag) {
                space.cell_dofs(facet.cell, &mut dofs);
                let geo = CellGeometry::new(mesh, facet.cell);
                let fv = mesh.kind().facets()[facet.local];
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    // reference point and tangents of the facet parametrization
                    let (xi, tangents) = facet_parametrization(mesh.kind(), refv, fv, p);
                    let jac = geo.jacobian_at(&xi);
                    let ds = match facet_dim {
                        1 => norm3(&jac.apply(&tangents[0])),
                        _ => norm3(&cross(&jac.apply(&tangents[0]), &jac.apply(&tangents[1]))),
                    };
                    let x = geo.map(&xi);
                    let fx = f(&x);
                    elem.eval(&xi, &mut vals, &mut g);
                    for (i, v) in vals.iter().enumerate() {
                        for a in 0..vd {
                            out[dofs[i * vd + a]] += w * ds * v * fx[a];
                        }
                    }
                }
            }
        }
    }
    space.zero_constrained(&mut out);
    Ok(out)
}

fn facet_parametrization(
    kind: CellKind,
    refv: &[[f64; 3]],
    fv: &[usize],
    p: &[f64; 3],
) -> ([f64; 3], [[f64; 3]; 2]) {
    let r = |k: usize| refv[fv[k]];
    let mut xi = [0.0; 3];
    let mut t = [[0.0; 3]; 2];
    if kind == CellKind::Hexahedron {
        let (s, u) = (p[0], p[1]);
        let w = [(1.0 - s) * (1.0 - u), s * (1.0 - u), s * u, (1.0 - s) * u];
        let ds = [-(1.0 - u), 1.0 - u, u, -u];
        let du = [-(1.0 - s), -s, s, 1.0 - s];
        for k in 0..4 {
            for d in 0..3 {
                xi[d] += w[k] * r(k)[d];
                t[0][d] += ds[k] * r(k)[d];
                t[1][d] += du[k] * r(k)[d];
            }
        }
    } else {
        let s = p[0];
        for d in 0..3 {
            xi[d] = (1.0 - s) * r(0)[d] + s * r(1)[d];
            t[0][d] = r(1)[d] - r(0)[d];
        }
    }
    (xi, t)
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
}

/// Integral of `|u|²` over the quadrature points selected by `keep`,
/// returned together with the measure of the selected set.
pub fn l2_norm_squared_where(space: &FeSpace, coeffs: &[f64], keep: impl Fn(&[f64; 3]) -> bool) -> (f64, f64) {
    let tab = Tabulation::new(space, 2 * space.order() + 2);
    let vd = space.value_dim();
    let mut grads = Vec::new();
    let mut dofs = Vec::new();
    let (mut sum, mut measure) = (0.0, 0.0);
    for c in 0..space.mesh().num_cells() {
        space.cell_dofs(c, &mut dofs);
        for_each_point(space, &tab, c, &dofs, &mut grads, |q| {
            if !keep(&q.x) {
                return;
            }
            let mut u = [0.0; 3];
            for (i, v) in q.values.iter().enumerate() {
                for a in 0..vd {
                    u[a] += v * coeffs[q.dofs[i * vd + a]];
                }
            }
            sum += q.weight * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
            measure += q.weight;
        });
    }
    (sum, measure)
}
