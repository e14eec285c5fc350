//! Structured meshes of the two substrate geometries.
//!
//! 2D: the square `[-w, w]²` split into triangles, every boundary edge tagged
//! [`BoundaryTag::Dirichlet`]. 3D: the cuboid `[-w, w]² × [-depth, 0]` made of
//! hexahedra, with the top surface `x₃ = 0` tagged [`BoundaryTag::Top`], the
//! bottom `x₃ = -depth` tagged [`BoundaryTag::Bottom`] and the four lateral
//! faces tagged [`BoundaryTag::Side`].

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Top,
    Side,
    Bottom,
    Dirichlet,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Top => "TOP",
            BoundaryTag::Side => "SIDE",
            BoundaryTag::Bottom => "BOTTOM",
            BoundaryTag::Dirichlet => "DIRICHLET",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Triangle,
    Quadrilateral,
    Hexahedron,
}

impl CellKind {
    pub fn vertex_count(self) -> usize {
        match self {
            CellKind::Triangle => 3,
            CellKind::Quadrilateral => 4,
            CellKind::Hexahedron => 8,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            CellKind::Triangle | CellKind::Quadrilateral => 2,
            CellKind::Hexahedron => 3,
        }
    }

    /// Local vertex lists of the facets, ordered so that the outward normal
    /// follows the right-hand rule (3D) or the edge runs counter-clockwise
    /// (2D).
    pub fn facets(self) -> &'static [&'static [usize]] {
        match self {
            CellKind::Triangle => &[&[1, 2], &[2, 0], &[0, 1]],
            CellKind::Quadrilateral => &[&[0, 1], &[1, 2], &[2, 3], &[3, 0]],
            CellKind::Hexahedron => &[
                &[0, 3, 2, 1],
                &[4, 5, 6, 7],
                &[0, 1, 5, 4],
                &[1, 2, 6, 5],
                &[2, 3, 7, 6],
                &[3, 0, 4, 7],
            ],
        }
    }
}

/// A boundary facet: the owning cell, its local facet index and tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub cell: usize,
    pub local: usize,
    pub tag: BoundaryTag,
}

/// Lattice description kept alongside structured meshes for point location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub half_width: f64,
    pub depth: f64,
    pub counts: [usize; 3],
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    kind: CellKind,
    vertices: Vec<[f64; 3]>,
    cells: Vec<usize>,
    facets: Vec<BoundaryFacet>,
    grid: Option<Grid>,
}

/// Triangulation of `[-half_width, half_width]²` with `nx × ny` squares, each
/// split along its rising diagonal.
pub fn build_rect_mesh(half_width: f64, nx: usize, ny: usize) -> Result<Mesh> {
    build_rect_mesh_with(half_width, nx, ny, false)
}

/// As [`build_rect_mesh`]; `flipped` splits every square along the falling
/// diagonal instead.
pub fn build_rect_mesh_with(half_width: f64, nx: usize, ny: usize, flipped: bool) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("mesh counts must be at least 1"));
    }
    if !(half_width > 0.0) {
        return Err(Error::InvalidArgument("half width must be positive"));
    }
    let coord = |i: usize, n: usize| -half_width + 2.0 * half_width * i as f64 / n as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([coord(i, nx), coord(j, ny), 0.0]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(6 * nx * ny);
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            let first = cells.len() / 3;
            // lower triangle touches y = j edge, upper touches y = j+1 edge
            let (lower, upper) = if flipped {
                ([v00, v10, v01], [v10, v11, v01])
            } else {
                ([v00, v10, v11], [v00, v11, v01])
            };
            cells.extend_from_slice(&lower);
            cells.extend_from_slice(&upper);
            let mut tag = |cell: usize, local: usize| {
                facets.push(BoundaryFacet {
                    cell,
                    local,
                    tag: BoundaryTag::Dirichlet,
                })
            };
            // local facet k is opposite local vertex k
            if j == 0 {
                tag(first, 2);
            }
            if j == ny - 1 {
                tag(first + 1, 0);
            }
            if i == 0 {
                tag(first + if flipped { 0 } else { 1 }, 1);
            }
            if i == nx - 1 {
                tag(first + if flipped { 1 } else { 0 }, if flipped { 2 } else { 0 });
            }
        }
    }
    Ok(Mesh {
        kind: CellKind::Triangle,
        vertices,
        cells,
        facets,
        grid: Some(Grid {
            half_width,
            depth: 0.0,
            counts: [nx, ny, 0],
            flipped,
        }),
    })
}

/// Hexahedral mesh of `[-half_width, half_width]² × [-depth, 0]`.
pub fn build_box_mesh(half_width: f64, depth: f64, nx: usize, ny: usize, nz: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidArgument("mesh counts must be at least 1"));
    }
    if !(half_width > 0.0 && depth > 0.0) {
        return Err(Error::InvalidArgument("box extents must be positive"));
    }
    let cx = |i: usize| -half_width + 2.0 * half_width * i as f64 / nx as f64;
    let cy = |j: usize| -half_width + 2.0 * half_width * j as f64 / ny as f64;
    let cz = |k: usize| -depth + depth * k as f64 / nz as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([cx(i), cy(j), cz(k)]);
            }
        }
    }
    let vid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut cells = Vec::with_capacity(8 * nx * ny * nz);
    let mut facets = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let cell = cells.len() / 8;
                cells.extend_from_slice(&[
                    vid(i, j, k),
                    vid(i + 1, j, k),
                    vid(i + 1, j + 1, k),
                    vid(i, j + 1, k),
                    vid(i, j, k + 1),
                    vid(i + 1, j, k + 1),
                    vid(i + 1, j + 1, k + 1),
                    vid(i, j + 1, k + 1),
                ]);
                let mut tag = |local: usize, tag: BoundaryTag| {
                    facets.push(BoundaryFacet { cell, local, tag })
                };
                if k == 0 {
                    tag(0, BoundaryTag::Bottom);
                }
                if k == nz - 1 {
                    tag(1, BoundaryTag::Top);
                }
                if j == 0 {
                    tag(2, BoundaryTag::Side);
                }
                if i == nx - 1 {
                    tag(3, BoundaryTag::Side);
                }
                if j == ny - 1 {
                    tag(4, BoundaryTag::Side);
                }
                if i == 0 {
                    tag(5, BoundaryTag::Side);
                }
            }
        }
    }
    Ok(Mesh {
        kind: CellKind::Hexahedron,
        vertices,
        cells,
        facets,
        grid: Some(Grid {
            half_width,
            depth,
            counts: [nx, ny, nz],
            flipped: false,
        }),
    })
}

impl Mesh {
    /// Builds a mesh from raw parts. Facet tags are not validated.
    pub fn from_parts(
        kind: CellKind,
        vertices: Vec<[f64; 3]>,
        cells: Vec<usize>,
        facets: Vec<BoundaryFacet>,
    ) -> Result<Self> {
        if !cells.len().is_multiple_of(kind.vertex_count()) {
            return Err(Error::InvalidArgument("cell array length"));
        }
        if cells.iter().any(|&v| v >= vertices.len()) {
            return Err(Error::InvalidArgument("cell references missing vertex"));
        }
        Ok(Self {
            kind,
            vertices,
            cells,
            facets,
            grid: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / self.kind.vertex_count()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let n = self.kind.vertex_count();
        &self.cells[c * n..(c + 1) * n]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.kind.vertex_count())
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.facets.iter().any(|f| f.tag == tag)
    }

    /// Global vertex indices of a boundary facet.
    pub fn facet_vertices(&self, facet: &BoundaryFacet) -> impl Iterator<Item = usize> + '_ {
        let cell = self.cell(facet.cell);
        self.kind.facets()[facet.local].iter().map(move |&l| cell[l])
    }

    /// Signed measure (area in 2D, volume in 3D) of a cell.
    pub fn cell_volume(&self, c: usize) -> f64 {
        let v = |k: usize| self.vertices[self.cell(c)[k]];
        match self.kind {
            CellKind::Triangle => {
                let (a, b, c) = (v(0), v(1), v(2));
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            }
            CellKind::Quadrilateral => {
                // shoelace
                (0..4)
                    .map(|k| {
                        let (p, q) = (v(k), v((k + 1) % 4));
                        0.5 * (p[0] * q[1] - q[0] * p[1])
                    })
                    .sum()
            }
            CellKind::Hexahedron => {
                let q = crate::fem::quadrature::hexahedron(2);
                let geo = crate::fem::geometry::CellGeometry::new(self, c);
                q.points
                    .iter()
                    .zip(&q.weights)
                    .map(|(p, w)| w * geo.jacobian_at(p).det())
                    .sum()
            }
        }
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_volume(c)).sum()
    }

    /// Outward unit normal of a planar 3D facet (or 2D edge, with zero third
    /// component).
    pub fn facet_normal(&self, facet: &BoundaryFacet) -> [f64; 3] {
        let ids: Vec<usize> = self.facet_vertices(facet).collect();
        let p = |k: usize| self.vertices[ids[k]];
        let n = if self.dim() == 2 {
            let (a, b) = (p(0), p(1));
            [b[1] - a[1], -(b[0] - a[0]), 0.0]
        } else {
            let (a, b, c) = (p(0), p(1), p(2));
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            [
                u[1] * w[2] - u[2] * w[1],
                u[2] * w[0] - u[0] * w[2],
                u[0] * w[1] - u[1] * w[0],
            ]
        };
        let len = crate::math::sqrt(n.iter().map(|x| x * x).sum());
        [n[0] / len, n[1] / len, n[2] / len]
    }

    /// The quadrilateral surface mesh induced by the facets carrying `tag`,
    /// together with the volume vertex index of each surface vertex.
    ///
    /// Surface vertices are projected to their first two coordinates. The
    /// result carries no boundary tags.
    pub fn facet_mesh(&self, tag: BoundaryTag) -> Result<(Mesh, Vec<usize>)> {
        if self.kind != CellKind::Hexahedron {
            return Err(Error::InvalidArgument("facet meshes are built from hexahedral meshes"));
        }
        if !self.has_tag(tag) {
            return Err(Error::UnknownTag);
        }
        let mut map = alloc::collections::BTreeMap::new();
        let mut volume_ids = Vec::new();
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        for f in self.facets.iter().filter(|f| f.tag == tag) {
            for v in self.facet_vertices(f) {
                let local = *map.entry(v).or_insert_with(|| {
                    volume_ids.push(v);
                    let p = self.vertices[v];
                    vertices.push([p[0], p[1], 0.0]);
                    volume_ids.len() - 1
                });
                cells.push(local);
            }
        }
        // orient counter-clockwise in the (x₁, x₂) plane
        for quad in cells.chunks_mut(4) {
            let p = |k: usize| vertices[quad[k]];
            let (a, b, c): ([f64; 3], [f64; 3], [f64; 3]) = (p(0), p(1), p(2));
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if cross < 0.0 {
                quad.swap(1, 3);
            }
        }
        let mut mesh = Mesh::from_parts(CellKind::Quadrilateral, vertices, cells, Vec::new())?;
        if let Some(g) = self.grid {
            mesh.grid = Some(Grid {
                counts: [g.counts[0], g.counts[1], 0],
                depth: 0.0,
                ..g
            });
        }
        Ok((mesh, volume_ids))
    }

    /// Locates the cell containing `x` and its reference coordinates.
    ///
    /// Uses the lattice description; only available for structured meshes.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, [f64; 3])> {
        let g = self.grid?;
        let w = g.half_width;
        let tol = 1e-12 * w;
        let index = |v: f64, lo: f64, len: f64, n: usize| -> Option<(usize, f64)> {
            let s = (v - lo) / len * n as f64;
            if s < -tol * n as f64 || s > n as f64 * (1.0 + tol) {
                return None;
            }
            let i = (s.max(0.0) as usize).min(n - 1);
            Some((i, (s - i as f64).clamp(0.0, 1.0)))
        };
        let (i, sx) = index(x[0], -w, 2.0 * w, g.counts[0])?;
        let (j, sy) = index(x[1], -w, 2.0 * w, g.counts[1])?;
        match self.kind {
            CellKind::Quadrilateral => Some((j * g.counts[0] + i, [sx, sy, 0.0])),
            CellKind::Hexahedron => {
                let (k, sz) = index(x[2], -g.depth, g.depth, g.counts[2])?;
                Some(((k * g.counts[1] + j) * g.counts[0] + i, [sx, sy, sz]))
            }
            CellKind::Triangle => {
                let first = 2 * (j * g.counts[0] + i);
                // reference coordinates are barycentric (λ₁, λ₂) of the local
                // vertices 1 and 2
                if g.flipped {
                    if sx + sy <= 1.0 {
                        Some((first, [sx, sy, 0.0]))
                    } else {
                        // (v10, v11, v01): x = v10 + a (v11 - v10) + b (v01 - v10)
                        let b = 1.0 - sx;
                        let a = sy - b;
                        Some((first + 1, [a.max(0.0), b, 0.0]))
                    }
                } else if sy <= sx {
                    // (v00, v10, v11)
                    Some((first, [sx - sy, sy, 0.0]))
                } else {
                    // (v00, v11, v01)
                    Some((first + 1, [sx, sy - sx, 0.0]))
                }
            }
        }
    }

    /// Checks the structural invariants: positive cell measures and facet
    /// tags consistent with the dimension.
    pub fn validate(&self) -> Result<()> {
        for c in 0..self.num_cells() {
            if !(self.cell_volume(c) > 0.0) {
                return Err(Error::InvalidArgument("cell with non-positive measure"));
            }
        }
        for f in &self.facets {
            let ok = match f.tag {
                BoundaryTag::Dirichlet => self.dim() == 2,
                _ => self.dim() == 3,
            };
            if !ok {
                return Err(Error::InvalidArgument("boundary tag does not match dimension"));
            }
        }
        Ok(())
    }

    /// Bounding box `(min, max)`.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Order-independent fingerprint of the geometry (FNV-1a over vertex
    /// bits and connectivity).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.kind as u64);
        for v in &self.vertices {
            for c in v {
                eat(c.to_bits());
            }
        }
        for &c in &self.cells {
            eat(c as u64);
        }
        h
    }
}

#[cfg(test)]
pub(crate) fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    crate::math::abs(a - b) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    #[test]
    fn minimal_rect() {
        let m = build_rect_mesh(1.0, 1, 1).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.boundary_facets().len(), 4);
        m.validate().unwrap();
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(build_rect_mesh(1.0, 0, 3).is_err());
        assert!(build_box_mesh(1.0, 1.0, 1, 0, 1).is_err());
    }

    #[test]
    fn rect_area() {
        let m = build_rect_mesh(3.0, 64, 64).unwrap();
        assert!(approx_eq(m.total_volume(), 36.0, 36.0 * 1e-12));
    }

    #[test]
    fn rect_boundary_endpoints_on_square() {
        for flipped in [false, true] {
            let m = build_rect_mesh_with(3.0, 4, 4, flipped).unwrap();
            let endpoints: Vec<usize> = m
                .boundary_facets()
                .iter()
                .flat_map(|f| m.facet_vertices(f).collect::<Vec<_>>())
                .collect();
            assert_eq!(endpoints.len(), 32);
            for v in endpoints {
                let p = m.vertices()[v];
                assert!(approx_eq(p[0].abs().max(p[1].abs()), 3.0, 1e-15));
            }
            // every boundary edge belongs to exactly one cell and the set of
            // boundary edges covers the 16 lattice edges once
            let mut seen = BTreeMap::new();
            for f in m.boundary_facets() {
                let mut e: Vec<usize> = m.facet_vertices(f).collect();
                e.sort();
                *seen.entry(e).or_insert(0) += 1;
            }
            assert_eq!(seen.len(), 16);
            assert!(seen.values().all(|&n| n == 1));
        }
    }

    #[test]
    fn single_hex() {
        let m = build_box_mesh(1.0, 1.0, 1, 1, 1).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.num_cells(), 1);
        let count = |t| m.boundary_facets().iter().filter(|f| f.tag == t).count();
        assert_eq!(count(BoundaryTag::Top), 1);
        assert_eq!(count(BoundaryTag::Bottom), 1);
        assert_eq!(count(BoundaryTag::Side), 4);
        m.validate().unwrap();
    }

    #[test]
    fn box_volume() {
        let m = build_box_mesh(2.0, 1.0, 8, 8, 4).unwrap();
        assert!(approx_eq(m.total_volume(), 16.0, 16.0 * 1e-12));
    }

    #[test]
    fn top_facets() {
        let m = build_box_mesh(2.0, 1.0, 2, 2, 2).unwrap();
        let top: Vec<_> = m
            .boundary_facets()
            .iter()
            .filter(|f| f.tag == BoundaryTag::Top)
            .collect();
        assert_eq!(top.len(), 4);
        for f in top {
            assert!(m.facet_vertices(f).all(|v| m.vertices()[v][2] == 0.0));
            assert_eq!(m.facet_normal(f), [0.0, 0.0, 1.0]);
        }
        for f in m.boundary_facets().iter().filter(|f| f.tag == BoundaryTag::Bottom) {
            assert_eq!(m.facet_normal(f), [0.0, 0.0, -1.0]);
        }
    }

    #[test]
    fn refinement_scales_cell_count() {
        let a = build_rect_mesh(3.0, 5, 7).unwrap();
        let b = build_rect_mesh(3.0, 10, 14).unwrap();
        assert_eq!(b.num_cells(), 4 * a.num_cells());
        assert!(approx_eq(a.total_volume(), b.total_volume(), 1e-12));
        let a = build_box_mesh(2.0, 1.0, 3, 2, 2).unwrap();
        let b = build_box_mesh(2.0, 1.0, 6, 4, 4).unwrap();
        assert_eq!(b.num_cells(), 8 * a.num_cells());
        assert!(approx_eq(a.total_volume(), b.total_volume(), 1e-12));
    }

    #[test]
    fn box_boundary_is_closed() {
        // each facet of the boundary surface is owned by exactly one cell and
        // the tagged facets cover the surface area 2·(4·4) + 4·(4·1)
        let m = build_box_mesh(2.0, 1.0, 3, 3, 2).unwrap();
        let mut seen = BTreeMap::new();
        for f in m.boundary_facets() {
            let mut e: Vec<usize> = m.facet_vertices(f).collect();
            e.sort();
            *seen.entry(e).or_insert(0) += 1;
        }
        assert!(seen.values().all(|&n| n == 1));
        assert_eq!(m.boundary_facets().len(), 2 * 9 + 4 * 6);
    }

    #[test]
    fn locate_round_trips() {
        for flipped in [false, true] {
            let m = build_rect_mesh_with(2.0, 3, 5, flipped).unwrap();
            for &x in &[[0.1, -0.3], [-1.9, 1.99], [1.2, 0.7], [2.0, -2.0]] {
                let (c, r) = m.locate(&x).unwrap();
                let v: Vec<[f64; 3]> = m.cell(c).iter().map(|&i| m.vertices()[i]).collect();
                for d in 0..2 {
                    let p = v[0][d] + r[0] * (v[1][d] - v[0][d]) + r[1] * (v[2][d] - v[0][d]);
                    assert!(approx_eq(p, x[d], 1e-12), "{flipped} {x:?}");
                }
            }
        }
    }
}
