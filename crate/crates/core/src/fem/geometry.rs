//! Affine (triangle) and multilinear (quadrilateral, hexahedron) cell maps.

use crate::math::abs;
use crate::mesh::{CellKind, Mesh};

/// Square matrix of size `dim ≤ 3`, stored padded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub dim: usize,
    pub m: [[f64; 3]; 3],
}

impl Jacobian {
    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// `J^{-T}`, which maps reference gradients to physical gradients.
    pub fn inverse_transpose(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        let d = self.det();
        let mut r = [[0.0; 3]; 3];
        if self.dim == 2 {
            r[0][0] = m[1][1] / d;
            r[0][1] = -m[1][0] / d;
            r[1][0] = -m[0][1] / d;
            r[1][1] = m[0][0] / d;
        } else {
            // cofactor matrix divided by det is J^{-T}
            for i in 0..3 {
                for j in 0..3 {
                    let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                    let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                    r[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) / d;
                }
            }
        }
        r
    }

    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.m[i][j] * v[j];
            }
        }
        out
    }
}

/// The map from the reference cell onto one mesh cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    kind: CellKind,
    verts: [[f64; 3]; 8],
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, cell: usize) -> Self {
        let mut verts = [[0.0; 3]; 8];
        for (k, &v) in mesh.cell(cell).iter().enumerate() {
            verts[k] = mesh.vertices()[v];
        }
        Self {
            kind: mesh.kind(),
            verts,
        }
    }

    fn shape(&self, p: &[f64; 3], n: &mut [f64; 8], dn: &mut [[f64; 3]; 8]) {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self.kind {
            CellKind::Triangle => {
                n[..3].copy_from_slice(&[1.0 - x - y, x, y]);
                dn[0] = [-1.0, -1.0, 0.0];
                dn[1] = [1.0, 0.0, 0.0];
                dn[2] = [0.0, 1.0, 0.0];
            }
            CellKind::Quadrilateral => {
                n[..4].copy_from_slice(&[(1.0 - x) * (1.0 - y), x * (1.0 - y), x * y, (1.0 - x) * y]);
                dn[0] = [-(1.0 - y), -(1.0 - x), 0.0];
                dn[1] = [1.0 - y, -x, 0.0];
                dn[2] = [y, x, 0.0];
                dn[3] = [-y, 1.0 - x, 0.0];
            }
            CellKind::Hexahedron => {
                let r = super::element::reference_vertices(CellKind::Hexahedron);
                for k in 0..8 {
                    let f = |c: f64, t: f64| if c > 0.5 { t } else { 1.0 - t };
                    let df = |c: f64| if c > 0.5 { 1.0 } else { -1.0 };
                    let (a, b, c) = (f(r[k][0], x), f(r[k][1], y), f(r[k][2], z));
                    n[k] = a * b * c;
                    dn[k] = [df(r[k][0]) * b * c, a * df(r[k][1]) * c, a * b * df(r[k][2])];
                }
            }
        }
    }

    pub fn map(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut n = [0.0; 8];
        let mut dn = [[0.0; 3]; 8];
        self.shape(p, &mut n, &mut dn);
        let mut x = [0.0; 3];
        for k in 0..self.kind.vertex_count() {
            for d in 0..3 {
                x[d] += n[k] * self.verts[k][d];
            }
        }
        x
    }

    /// `J_{ij} = ∂x_i / ∂ξ_j`.
    pub fn jacobian_at(&self, p: &[f64; 3]) -> Jacobian {
        let mut n = [0.0; 8];
        let mut dn = [[0.0; 3]; 8];
        self.shape(p, &mut n, &mut dn);
        let dim = self.kind.dim();
        let mut m = [[0.0; 3]; 3];
        for k in 0..self.kind.vertex_count() {
            for i in 0..dim {
                for j in 0..dim {
                    m[i][j] += self.verts[k][i] * dn[k][j];
                }
            }
        }
        Jacobian { dim, m }
    }

    /// Whether the cell map is affine, so the Jacobian is constant.
    pub fn is_affine(&self) -> bool {
        match self.kind {
            CellKind::Triangle => true,
            CellKind::Quadrilateral => {
                let v = &self.verts;
                (0..2).all(|d| abs(v[0][d] + v[2][d] - v[1][d] - v[3][d]) < 1e-14)
            }
            CellKind::Hexahedron => false,
        }
    }
}
