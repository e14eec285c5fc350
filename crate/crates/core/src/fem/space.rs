use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::element::ReferenceElement;
use super::geometry::CellGeometry;
use crate::error::{Error, Result};
use crate::math::round;
use crate::mesh::{BoundaryTag, CellKind, Mesh};

/// Vector-valued Lagrange space on a mesh.
///
/// Nodes are numbered in lattice order (`x₁` fastest, then `x₂`, then `x₃`)
/// and dof `node · value_dim + component`. Dofs at nodes on facets tagged
/// [`BoundaryTag::Dirichlet`] (2D) or [`BoundaryTag::Bottom`] (3D) are
/// constrained.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    element: ReferenceElement,
    value_dim: usize,
    nodes: Vec<[f64; 3]>,
    cell_nodes: Vec<usize>,
    constrained: Vec<bool>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, order: usize, value_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&value_dim) {
            return Err(Error::InvalidArgument("value dimension must be 1, 2 or 3"));
        }
        let element = ReferenceElement::new(mesh.kind(), order)?;
        let per_cell = element.num_nodes();
        let (lo, hi) = mesh.bounds();
        let extent = (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max).max(1e-300);
        let key = |x: &[f64; 3]| -> [i64; 3] {
            let q = |d: usize| round((x[d] - lo[d]) / extent * 1e9) as i64;
            [q(2), q(1), q(0)]
        };

        let mut points = Vec::with_capacity(mesh.num_cells() * per_cell);
        for c in 0..mesh.num_cells() {
            let geo = CellGeometry::new(&mesh, c);
            for p in element.nodes() {
                points.push(geo.map(p));
            }
        }
        let mut index: BTreeMap<[i64; 3], usize> = BTreeMap::new();
        for p in &points {
            index.entry(key(p)).or_insert(0);
        }
        for (n, slot) in index.values_mut().enumerate() {
            *slot = n;
        }
        let mut nodes = vec![[0.0; 3]; index.len()];
        let cell_nodes: Vec<usize> = points
            .iter()
            .map(|p| {
                let n = index[&key(p)];
                nodes[n] = *p;
                n
            })
            .collect();

        let pinned = match mesh.dim() {
            2 => BoundaryTag::Dirichlet,
            _ => BoundaryTag::Bottom,
        };
        let mut constrained = vec![false; nodes.len()];
        for f in mesh.boundary_facets().iter().filter(|f| f.tag == pinned) {
            for l in element.facet_nodes(f.local) {
                constrained[cell_nodes[f.cell * per_cell + l]] = true;
            }
        }
        Ok(Self {
            mesh,
            element,
            value_dim,
            nodes,
            cell_nodes,
            constrained,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn order(&self) -> usize {
        self.element.order()
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.nodes.len() * self.value_dim
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.element.num_nodes()
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let n = self.element.num_nodes();
        &self.cell_nodes[cell * n..(cell + 1) * n]
    }

    /// Global dofs of a cell, ordered `local_node · value_dim + component`.
    pub fn cell_dofs(&self, cell: usize, out: &mut Vec<usize>) {
        out.clear();
        for &n in self.cell_nodes(cell) {
            for a in 0..self.value_dim {
                out.push(n * self.value_dim + a);
            }
        }
    }

    pub fn is_constrained_node(&self, node: usize) -> bool {
        self.constrained[node]
    }

    /// Per-dof constraint mask.
    pub fn constrained_dofs(&self) -> Vec<bool> {
        self.constrained
            .iter()
            .flat_map(|&c| core::iter::repeat_n(c, self.value_dim))
            .collect()
    }

    /// Sets constrained dofs of `v` to zero.
    pub fn zero_constrained(&self, v: &mut [f64]) {
        for (node, &c) in self.constrained.iter().enumerate() {
            if c {
                for a in 0..self.value_dim {
                    v[node * self.value_dim + a] = 0.0;
                }
            }
        }
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_dofs());
        for x in &self.nodes {
            let v = f(x);
            out.extend_from_slice(&v[..self.value_dim]);
        }
        out
    }

    /// Evaluates the finite element function `coeffs` at a physical point.
    /// Requires a structured mesh; returns `None` outside the domain.
    pub fn evaluate(&self, coeffs: &[f64], x: &[f64]) -> Option<[f64; 3]> {
        let (cell, r) = self.mesh.locate(x)?;
        let n = self.element.num_nodes();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 3]; n];
        self.element.eval(&r, &mut v, &mut g);
        let mut out = [0.0; 3];
        for (l, &node) in self.cell_nodes(cell).iter().enumerate() {
            for a in 0..self.value_dim {
                out[a] += v[l] * coeffs[node * self.value_dim + a];
            }
        }
        Some(out)
    }

    /// Transfers a function from another space by nodal interpolation.
    /// Nodes outside the source domain receive zero.
    pub fn transfer_from(&self, source: &FeSpace, coeffs: &[f64]) -> Vec<f64> {
        self.interpolate(|x| source.evaluate(coeffs, x).unwrap_or([0.0; 3]))
    }

    pub fn is_simplicial(&self) -> bool {
        self.mesh.kind() == CellKind::Triangle
    }
}

/// A coefficient vector bound to its space.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.num_dofs() {
            return Err(Error::InvalidArgument("coefficient length does not match space"));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn evaluate(&self, x: &[f64]) -> Option<[f64; 3]> {
        self.space.evaluate(&self.coeffs, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, build_rect_mesh};

    #[test]
    fn dof_counts() {
        let m = Arc::new(build_rect_mesh(1.0, 4, 3).unwrap());
        for k in 1..=3 {
            let s = FeSpace::new(m.clone(), k, 2).unwrap();
            assert_eq!(s.num_nodes(), (4 * k + 1) * (3 * k + 1));
            assert_eq!(s.num_dofs(), 2 * s.num_nodes());
        }
        let m = Arc::new(build_box_mesh(1.0, 1.0, 2, 2, 1).unwrap());
        let s = FeSpace::new(m, 2, 3).unwrap();
        assert_eq!(s.num_nodes(), 5 * 5 * 3);
    }

    #[test]
    fn constrained_nodes_are_exactly_boundary() {
        let m = Arc::new(build_rect_mesh(2.0, 3, 3).unwrap());
        let s = FeSpace::new(m, 3, 2).unwrap();
        for (n, x) in s.nodes().iter().enumerate() {
            let on = (x[0].abs() - 2.0).abs() < 1e-12 || (x[1].abs() - 2.0).abs() < 1e-12;
            assert_eq!(s.is_constrained_node(n), on);
        }
        let m = Arc::new(build_box_mesh(1.0, 1.0, 2, 2, 2).unwrap());
        let s = FeSpace::new(m, 2, 3).unwrap();
        for (n, x) in s.nodes().iter().enumerate() {
            assert_eq!(s.is_constrained_node(n), (x[2] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_reproduces_polynomials() {
        let m = Arc::new(crate::mesh::build_rect_mesh_with(1.5, 3, 4, true).unwrap());
        let s = FeSpace::new(m, 3, 2).unwrap();
        let f = |x: &[f64; 3]| [x[0].powi(3) - x[0] * x[1], x[1] * x[1] + 2.0, 0.0];
        let c = s.interpolate(f);
        for p in [[0.3, -1.1], [1.5, 1.5], [-0.77, 0.2]] {
            let v = s.evaluate(&c, &p).unwrap();
            let e = f(&[p[0], p[1], 0.0]);
            assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
        }
        assert!(s.evaluate(&c, &[1.6, 0.0]).is_none());
    }

    #[test]
    fn coefficient_length_checked() {
        let m = Arc::new(build_rect_mesh(1.0, 1, 1).unwrap());
        let s = Arc::new(FeSpace::new(m, 1, 2).unwrap());
        assert!(FeFunction::new(s.clone(), vec![0.0; 3]).is_err());
        assert_eq!(FeFunction::zeros(s).coeffs().len(), 8);
    }
}
