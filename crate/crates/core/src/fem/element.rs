//! Lagrange reference elements of order 1–3: `P_k` on the unit triangle and
//! tensor-product `Q_k` on the unit square and cube, all with equispaced
//! nodes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::math::powi;
use crate::mesh::CellKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    kind: CellKind,
    order: usize,
    nodes: Vec<[f64; 3]>,
    /// Monomial coefficients of the triangle basis (`monomials × nodes`).
    simplex_coeffs: Vec<f64>,
    monomials: Vec<(i32, i32)>,
}

impl ReferenceElement {
    pub fn new(kind: CellKind, order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidArgument("polynomial order must be 1, 2 or 3"));
        }
        let k = order as f64;
        let mut nodes = Vec::new();
        let mut monomials = Vec::new();
        let mut simplex_coeffs = Vec::new();
        match kind {
            CellKind::Triangle => {
                for j in 0..=order {
                    for i in 0..=order - j {
                        nodes.push([i as f64 / k, j as f64 / k, 0.0]);
                        monomials.push((i as i32, j as i32));
                    }
                }
                let n = nodes.len();
                let mut v = vec![0.0; n * n];
                for (r, p) in nodes.iter().enumerate() {
                    for (c, &(a, b)) in monomials.iter().enumerate() {
                        v[r * n + c] = powi(p[0], a) * powi(p[1], b);
                    }
                }
                simplex_coeffs = dense::inverse(n, &v)?;
            }
            CellKind::Quadrilateral => {
                for j in 0..=order {
                    for i in 0..=order {
                        nodes.push([i as f64 / k, j as f64 / k, 0.0]);
                    }
                }
            }
            CellKind::Hexahedron => {
                for l in 0..=order {
                    for j in 0..=order {
                        for i in 0..=order {
                            nodes.push([i as f64 / k, j as f64 / k, l as f64 / k]);
                        }
                    }
                }
            }
        }
        Ok(Self {
            kind,
            order,
            nodes,
            simplex_coeffs,
            monomials,
        })
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Basis values and reference gradients at `p`.
    pub fn eval(&self, p: &[f64; 3], values: &mut [f64], grads: &mut [[f64; 3]]) {
        let n = self.nodes.len();
        debug_assert!(values.len() == n && grads.len() == n);
        match self.kind {
            CellKind::Triangle => {
                for i in 0..n {
                    let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                    for (m, &(a, b)) in self.monomials.iter().enumerate() {
                        let c = self.simplex_coeffs[m * n + i];
                        if c == 0.0 {
                            continue;
                        }
                        v += c * powi(p[0], a) * powi(p[1], b);
                        if a > 0 {
                            gx += c * a as f64 * powi(p[0], a - 1) * powi(p[1], b);
                        }
                        if b > 0 {
                            gy += c * b as f64 * powi(p[0], a) * powi(p[1], b - 1);
                        }
                    }
                    values[i] = v;
                    grads[i] = [gx, gy, 0.0];
                }
            }
            CellKind::Quadrilateral | CellKind::Hexahedron => {
                let m = self.order + 1;
                let dim = self.kind.dim();
                let mut l = [[0.0; 4]; 3];
                let mut dl = [[0.0; 4]; 3];
                for d in 0..dim {
                    for j in 0..m {
                        let (v, dv) = lagrange_1d(self.order, j, p[d]);
                        l[d][j] = v;
                        dl[d][j] = dv;
                    }
                }
                for idx in 0..n {
                    let i = idx % m;
                    let j = (idx / m) % m;
                    let k = idx / (m * m);
                    if dim == 2 {
                        values[idx] = l[0][i] * l[1][j];
                        grads[idx] = [dl[0][i] * l[1][j], l[0][i] * dl[1][j], 0.0];
                    } else {
                        values[idx] = l[0][i] * l[1][j] * l[2][k];
                        grads[idx] = [
                            dl[0][i] * l[1][j] * l[2][k],
                            l[0][i] * dl[1][j] * l[2][k],
                            l[0][i] * l[1][j] * dl[2][k],
                        ];
                    }
                }
            }
        }
    }

    /// Local nodes lying on local facet `facet` (numbering of
    /// [`CellKind::facets`]).
    pub fn facet_nodes(&self, facet: usize) -> Vec<usize> {
        let on = |p: &[f64; 3]| -> bool {
            let z = |x: f64| crate::math::abs(x) < 1e-12;
            let one = |x: f64| crate::math::abs(x - 1.0) < 1e-12;
            match (self.kind, facet) {
                (CellKind::Triangle, 0) => one(p[0] + p[1]),
                (CellKind::Triangle, 1) => z(p[0]),
                (CellKind::Triangle, 2) => z(p[1]),
                (CellKind::Quadrilateral, 0) => z(p[1]),
                (CellKind::Quadrilateral, 1) => one(p[0]),
                (CellKind::Quadrilateral, 2) => one(p[1]),
                (CellKind::Quadrilateral, 3) => z(p[0]),
                (CellKind::Hexahedron, 0) => z(p[2]),
                (CellKind::Hexahedron, 1) => one(p[2]),
                (CellKind::Hexahedron, 2) => z(p[1]),
                (CellKind::Hexahedron, 3) => one(p[0]),
                (CellKind::Hexahedron, 4) => one(p[1]),
                (CellKind::Hexahedron, 5) => z(p[0]),
                _ => false,
            }
        };
        (0..self.nodes.len()).filter(|&i| on(&self.nodes[i])).collect()
    }
}

/// Value and derivative of the `j`-th 1D Lagrange polynomial on the nodes
/// `0, 1/k, …, 1`.
fn lagrange_1d(order: usize, j: usize, s: f64) -> (f64, f64) {
    let k = order as f64;
    let tj = j as f64 / k;
    let mut value = 1.0;
    let mut deriv = 0.0;
    for m in 0..=order {
        if m == j {
            continue;
        }
        let tm = m as f64 / k;
        let f = (s - tm) / (tj - tm);
        deriv = deriv * f + value / (tj - tm);
        value *= f;
    }
    (value, deriv)
}

/// Reference coordinates of the cell vertices.
pub fn reference_vertices(kind: CellKind) -> &'static [[f64; 3]] {
    match kind {
        CellKind::Triangle => &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        CellKind::Quadrilateral => &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        CellKind::Hexahedron => &[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0],
        ],
    }
}
