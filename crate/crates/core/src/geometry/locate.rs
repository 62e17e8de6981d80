//! Point location on a mesh through a uniform bucket grid.

use super::element::{self, NODE_LOCAL_COORDS};
use super::{GeometryError, LocalPoint, Mesh};
use crate::Vec2;

/// A physical point resolved to an element and its local coordinates, with
/// the shape-function values needed to interpolate nodal data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPoint {
    pub element: usize,
    pub local: LocalPoint,
    pub weights: [f64; 6],
    /// Set when the point coincides with a node of the element; interpolation
    /// then returns that node's value exactly.
    pub node: Option<u8>,
}

impl ElementPoint {
    /// Interpolates per-node vector data through the element connectivity.
    pub fn interpolate(&self, mesh: &Mesh, values: &[Vec2]) -> Vec2 {
        let conn = &mesh.elements()[self.element];
        if let Some(k) = self.node {
            return values[conn[k as usize]];
        }
        let mut out = [0.0; 2];
        for (w, &n) in self.weights.iter().zip(conn) {
            out[0] += w * values[n][0];
            out[1] += w * values[n][1];
        }
        out
    }
}

const LOCAL_TOL: f64 = 1e-10;
const NODE_SNAP: f64 = 1e-12;

#[derive(Debug)]
pub(crate) struct Locator {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    pub(crate) fn build(mesh: &Mesh) -> Self {
        let b = mesh.bounds();
        let side = ((mesh.element_count() as f64) / 2.0).sqrt().ceil().max(1.0) as usize;
        let (nx, ny) = (side, side);
        let dx = (b.width / nx as f64).max(f64::MIN_POSITIVE);
        let dy = (b.height / ny as f64).max(f64::MIN_POSITIVE);
        let mut buckets = vec![Vec::new(); nx * ny];
        let pad = 1e-9 * b.width.max(b.height);
        for e in 0..mesh.element_count() {
            let x = mesh.element_coords(e);
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in &x {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let i0 = (((lo[0] - pad - b.x0) / dx).floor().max(0.0) as usize).min(nx - 1);
            let i1 = (((hi[0] + pad - b.x0) / dx).floor().max(0.0) as usize).min(nx - 1);
            let j0 = (((lo[1] - pad - b.y0) / dy).floor().max(0.0) as usize).min(ny - 1);
            let j1 = (((hi[1] + pad - b.y0) / dy).floor().max(0.0) as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(e as u32);
                }
            }
        }
        Locator {
            x0: b.x0,
            y0: b.y0,
            dx,
            dy,
            nx,
            ny,
            buckets,
        }
    }

    fn candidates(&self, p: Vec2) -> &[u32] {
        let fi = (p[0] - self.x0) / self.dx;
        let fj = (p[1] - self.y0) / self.dy;
        if !(fi > -1e-6 && fj > -1e-6 && fi < self.nx as f64 + 1e-6 && fj < self.ny as f64 + 1e-6) {
            return &[];
        }
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = (fj.max(0.0) as usize).min(self.ny - 1);
        &self.buckets[j * self.nx + i]
    }
}

impl Mesh {
    /// Finds the element containing `p` (lowest element index on shared
    /// edges) and the local coordinates of `p` in it.
    pub fn locate(&self, p: Vec2) -> Result<ElementPoint, GeometryError> {
        for &e in self.locator().candidates(p) {
            let e = e as usize;
            let x = self.element_coords(e);
            let Some(local) = element::invert_map(&x, p) else {
                continue;
            };
            let (a, b) = (local[0], local[1]);
            if a < -LOCAL_TOL || b < -LOCAL_TOL || a + b > 1.0 + LOCAL_TOL {
                continue;
            }
            let node = NODE_LOCAL_COORDS
                .iter()
                .position(|n| (n[0] - a).abs() < NODE_SNAP && (n[1] - b).abs() < NODE_SNAP)
                .map(|k| k as u8);
            return Ok(ElementPoint {
                element: e,
                local,
                weights: element::shape_values(local),
                node,
            });
        }
        Err(GeometryError::PointOutsideMesh(p))
    }
}

#[cfg(test)]
mod tests {
    use crate::geometry::{Mesh, Phase, Rect};

    #[test]
    fn locates_every_node_exactly() {
        let m = Mesh::structured(Rect::new(-1.0, 0.5, 3.0, 2.0), 7, 5, |_| Phase::Matrix).unwrap();
        let values: Vec<[f64; 2]> = (0..m.node_count()).map(|i| [i as f64 * 0.37, -(i as f64).sqrt()]).collect();
        for (i, &p) in m.nodes().iter().enumerate() {
            let ep = m.locate(p).unwrap();
            assert_eq!(ep.interpolate(&m, &values), values[i]);
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        let m = Mesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 3, 3, |_| Phase::Matrix).unwrap();
        assert!(m.locate([1.5, 0.5]).is_err());
        assert!(m.locate([0.5, -0.01]).is_err());
        assert!(m.locate([1.0, 1.0]).is_ok());
    }
}
