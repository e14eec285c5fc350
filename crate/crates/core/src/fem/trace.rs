use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::FeSpace;
use crate::error::{Error, Result};
use crate::math::round;
use crate::mesh::BoundaryTag;

/// Restriction of a 3D space to the surface carrying a boundary tag.
///
/// The trace space uses the same order and value dimension on the
/// quadrilateral facet mesh; every trace node coincides with a volume node.
#[derive(Debug, Clone)]
pub struct Trace {
    space: Arc<FeSpace>,
    volume_node: Vec<usize>,
    volume_value_dim: usize,
    volume_dofs: usize,
}

impl Trace {
    pub fn new(volume: &FeSpace, tag: BoundaryTag) -> Result<Self> {
        let (facet_mesh, _) = volume.mesh().facet_mesh(tag)?;
        let space = FeSpace::new(Arc::new(facet_mesh), volume.order(), volume.value_dim())?;
        let (lo, hi) = volume.mesh().bounds();
        let extent = (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max);
        let key = |x: &[f64; 3]| {
            [
                round((x[0] - lo[0]) / extent * 1e9) as i64,
                round((x[1] - lo[1]) / extent * 1e9) as i64,
            ]
        };
        // the surface height of the tagged facets
        let mesh = volume.mesh();
        let facet = mesh
            .boundary_facets()
            .iter()
            .find(|f| f.tag == tag)
            .ok_or(Error::UnknownTag)?;
        let height = mesh.vertices()[mesh.facet_vertices(facet).next().unwrap()][2];
        let mut on_surface = BTreeMap::new();
        for (n, x) in volume.nodes().iter().enumerate() {
            if crate::math::abs(x[2] - height) <= 1e-12 * extent.max(1.0) {
                on_surface.insert(key(x), n);
            }
        }
        let volume_node = space
            .nodes()
            .iter()
            .map(|x| on_surface.get(&key(x)).copied().ok_or(Error::InvalidArgument("trace node without volume node")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space: Arc::new(space),
            volume_node,
            volume_value_dim: volume.value_dim(),
            volume_dofs: volume.num_dofs(),
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn volume_nodes(&self) -> &[usize] {
        &self.volume_node
    }

    /// Restricts a volume function to the surface.
    pub fn restrict(&self, volume: &[f64]) -> Vec<f64> {
        let vd = self.volume_value_dim;
        let mut out = Vec::with_capacity(self.volume_node.len() * vd);
        for &n in &self.volume_node {
            out.extend_from_slice(&volume[n * vd..(n + 1) * vd]);
        }
        out
    }

    /// Scatters surface dofs into a zero volume vector (the transpose of
    /// [`Trace::restrict`]).
    pub fn extend(&self, surface: &[f64]) -> Vec<f64> {
        let vd = self.volume_value_dim;
        let mut out = vec![0.0; self.volume_dofs];
        for (t, &n) in self.volume_node.iter().enumerate() {
            out[n * vd..(n + 1) * vd].copy_from_slice(&surface[t * vd..(t + 1) * vd]);
        }
        out
    }
}

/// Restriction of `u` to the top surface of its 3D mesh.
pub fn trace_on(space: &FeSpace, u: &[f64], tag: BoundaryTag) -> Result<(Trace, Vec<f64>)> {
    if tag != BoundaryTag::Top {
        return Err(Error::InvalidArgument("traces are taken on the TOP surface"));
    }
    let trace = Trace::new(space, tag)?;
    let values = trace.restrict(u);
    Ok((trace, values))
}
