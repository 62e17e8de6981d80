use super::element::{self, GAUSS_POINTS};
use super::locate::Locator;
use super::{GeometryError, Microstructure, Rect};
use crate::Vec2;
use std::collections::HashMap;
use std::sync::OnceLock;

/// Material phase sampled at a Gauss point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Matrix,
    Inclusion,
}

impl Phase {
    pub fn from_indicator(chi: u8) -> Self {
        if chi == 0 {
            Phase::Matrix
        } else {
            Phase::Inclusion
        }
    }

    /// File label: 1 for the matrix, 2 for inclusions.
    pub fn label(self) -> u8 {
        match self {
            Phase::Matrix => 1,
            Phase::Inclusion => 2,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            1 => Some(Phase::Matrix),
            2 => Some(Phase::Inclusion),
            _ => None,
        }
    }
}

/// Sides of a rectangular domain, numbered counter-clockwise from the bottom
/// edge (bottom, right, top, left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// Closed counter-clockwise loop of boundary nodes with arc-length stations.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    pub nodes: Vec<usize>,
    /// Arc length from the first node, one entry per node.
    pub arc_length: Vec<f64>,
    pub perimeter: f64,
}

impl BoundaryLoop {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Mesh of six-node triangles with per-Gauss-point phase labels.
#[derive(Debug)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    elements: Vec<[usize; 6]>,
    gauss_material: Vec<[Phase; 3]>,
    boundary: BoundaryLoop,
    bounds: Rect,
    locator: OnceLock<Locator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            nodes: self.nodes.clone(),
            elements: self.elements.clone(),
            gauss_material: self.gauss_material.clone(),
            boundary: self.boundary.clone(),
            bounds: self.bounds,
            locator: OnceLock::new(),
        }
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.elements == other.elements && self.gauss_material == other.gauss_material
    }
}

/// Cell counts `(nx, ny)` of a structured grid on `window` whose boundary has
/// `boundary_nodes` nodes. Each cell edge carries two boundary nodes, so the
/// count must be a multiple of 4 that splits into `2 (nx + ny)` edges.
pub fn cells_for_boundary_nodes(window: &Rect, boundary_nodes: usize) -> Result<(usize, usize), GeometryError> {
    if boundary_nodes < 8 || boundary_nodes % 4 != 0 {
        return Err(GeometryError::InvalidParameters(format!(
            "boundary node count {boundary_nodes} must be a multiple of 4 and at least 8"
        )));
    }
    let total = boundary_nodes / 4; // nx + ny
    let nx = ((total as f64) * window.width / (window.width + window.height)).round() as usize;
    let nx = nx.clamp(1, total - 1);
    Ok((nx, total - nx))
}

impl Mesh {
    /// Assembles a mesh from raw parts, checking Jacobians and extracting the
    /// boundary loop.
    pub fn from_parts(
        nodes: Vec<Vec2>,
        elements: Vec<[usize; 6]>,
        gauss_material: Vec<[Phase; 3]>,
    ) -> Result<Self, GeometryError> {
        if nodes.is_empty() || elements.is_empty() {
            return Err(GeometryError::MeshDegenerate("mesh has no nodes or elements".into()));
        }
        if gauss_material.len() != elements.len() {
            return Err(GeometryError::MeshDegenerate(format!(
                "{} material rows for {} elements",
                gauss_material.len(),
                elements.len()
            )));
        }
        if let Some(bad) = elements.iter().flatten().find(|&&n| n >= nodes.len()) {
            return Err(GeometryError::MeshDegenerate(format!("node index {bad} out of range")));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &nodes {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let mut mesh = Mesh {
            nodes,
            elements,
            gauss_material,
            boundary: BoundaryLoop {
                nodes: Vec::new(),
                arc_length: Vec::new(),
                perimeter: 0.0,
            },
            bounds: Rect::new(x0, y0, x1 - x0, y1 - y0),
            locator: OnceLock::new(),
        };
        for e in 0..mesh.elements.len() {
            let x = mesh.element_coords(e);
            for &(a, b, _) in &GAUSS_POINTS {
                let det = element::det2(&element::jacobian(&x, [a, b]));
                if !(det > 0.0) {
                    return Err(GeometryError::MeshDegenerate(format!(
                        "element {e} has Jacobian determinant {det:e} at a Gauss point"
                    )));
                }
            }
        }
        mesh.boundary = mesh.trace_boundary()?;
        Ok(mesh)
    }

    /// Structured grid of `nx x ny` cells on `rect`, each split into two
    /// triangles with alternating diagonals. `phase` is evaluated at the
    /// physical Gauss points.
    pub fn structured(
        rect: Rect,
        nx: usize,
        ny: usize,
        phase: impl Fn(Vec2) -> Phase,
    ) -> Result<Self, GeometryError> {
        if nx == 0 || ny == 0 || !(rect.width > 0.0) || !(rect.height > 0.0) {
            return Err(GeometryError::MeshDegenerate(format!(
                "cannot grid {rect:?} with {nx}x{ny} cells"
            )));
        }
        let (cols, rows) = (2 * nx + 1, 2 * ny + 1);
        let mut nodes = Vec::with_capacity(cols * rows);
        for j in 0..rows {
            // Hit the far edge exactly instead of accumulating rounding.
            let y = if j + 1 == rows {
                rect.y1()
            } else {
                rect.y0 + rect.height * (j as f64) / ((rows - 1) as f64)
            };
            for i in 0..cols {
                let x = if i + 1 == cols {
                    rect.x1()
                } else {
                    rect.x0 + rect.width * (i as f64) / ((cols - 1) as f64)
                };
                nodes.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * cols + i;
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for cj in 0..ny {
            for ci in 0..nx {
                let (i, j) = (2 * ci, 2 * cj);
                let p00 = id(i, j);
                let p10 = id(i + 2, j);
                let p11 = id(i + 2, j + 2);
                let p01 = id(i, j + 2);
                let mb = id(i + 1, j); // bottom mid
                let mr = id(i + 2, j + 1);
                let mt = id(i + 1, j + 2);
                let ml = id(i, j + 1);
                let mc = id(i + 1, j + 1);
                if (ci + cj) % 2 == 0 {
                    elements.push([p00, p10, p11, mb, mr, mc]);
                    elements.push([p00, p11, p01, mc, mt, ml]);
                } else {
                    elements.push([p00, p10, p01, mb, mc, ml]);
                    elements.push([p10, p11, p01, mr, mt, mc]);
                }
            }
        }
        let gauss_material = elements
            .iter()
            .map(|conn| {
                let x: [[f64; 2]; 6] = std::array::from_fn(|k| nodes[conn[k]]);
                std::array::from_fn(|q| {
                    let (a, b, _) = GAUSS_POINTS[q];
                    phase(element::map_point(&x, [a, b]))
                })
            })
            .collect();
        Mesh::from_parts(nodes, elements, gauss_material)
    }

    /// Meshes the full microstructure domain with cells of edge length close
    /// to `target_edge_length`. The mesh does not conform to the inclusions;
    /// phases are assigned per Gauss point.
    pub fn generate(micro: &Microstructure, target_edge_length: f64) -> Result<Self, GeometryError> {
        let domain = micro.domain();
        let (nx, ny) = grid_counts(&domain, target_edge_length)?;
        Mesh::structured(domain, nx, ny, |p| Phase::from_indicator(micro.indicator(p)))
    }

    /// Meshes the window of the microstructure seen by the MVE model.
    pub fn extract_mve(
        micro: &Microstructure,
        dns: &Mesh,
        window: Rect,
        target_edge_length: f64,
    ) -> Result<Self, GeometryError> {
        let (nx, ny) = grid_counts(&window, target_edge_length)?;
        Mesh::extract_mve_with_cells(micro, dns, window, nx, ny)
    }

    /// As [`Mesh::extract_mve`] with explicit cell counts; the boundary then
    /// carries `4 (nx + ny)` equally spaced nodes per unit aspect.
    pub fn extract_mve_with_cells(
        micro: &Microstructure,
        dns: &Mesh,
        window: Rect,
        nx: usize,
        ny: usize,
    ) -> Result<Self, GeometryError> {
        let domain = dns.bounds();
        let tol = 1e-9 * domain.width.max(domain.height);
        if !domain.contains_rect(&window, tol) || !(window.width > 0.0 && window.height > 0.0) {
            return Err(GeometryError::WindowOutsideDomain { window, domain });
        }
        Mesh::structured(window, nx, ny, |p| Phase::from_indicator(micro.indicator(p)))
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 6]] {
        &self.elements
    }

    pub fn gauss_material(&self) -> &[[Phase; 3]] {
        &self.gauss_material
    }

    pub fn boundary(&self) -> &BoundaryLoop {
        &self.boundary
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 6] {
        let conn = &self.elements[e];
        std::array::from_fn(|k| self.nodes[conn[k]])
    }

    pub fn gauss_point_coords(&self, e: usize) -> [Vec2; 3] {
        let x = self.element_coords(e);
        std::array::from_fn(|q| {
            let (a, b, _) = GAUSS_POINTS[q];
            element::map_point(&x, [a, b])
        })
    }

    /// Smallest Jacobian determinant over all Gauss points.
    pub fn min_jacobian(&self) -> f64 {
        (0..self.elements.len())
            .flat_map(|e| {
                let x = self.element_coords(e);
                GAUSS_POINTS
                    .iter()
                    .map(move |&(a, b, _)| element::det2(&element::jacobian(&x, [a, b])))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Total area by quadrature.
    pub fn area(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| {
                let x = self.element_coords(e);
                GAUSS_POINTS
                    .iter()
                    .map(|&(a, b, w)| w * element::det2(&element::jacobian(&x, [a, b])))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Boundary nodes lying on one side of the bounding rectangle.
    pub fn nodes_on_side(&self, side: Side) -> Vec<usize> {
        let b = self.bounds;
        let tol = 1e-9 * b.width.max(b.height);
        self.boundary
            .nodes
            .iter()
            .copied()
            .filter(|&n| {
                let p = self.nodes[n];
                match side {
                    Side::Bottom => (p[1] - b.y0).abs() <= tol,
                    Side::Right => (p[0] - b.x1()).abs() <= tol,
                    Side::Top => (p[1] - b.y1()).abs() <= tol,
                    Side::Left => (p[0] - b.x0).abs() <= tol,
                }
            })
            .collect()
    }

    pub(crate) fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::build(self))
    }

    fn trace_boundary(&self) -> Result<BoundaryLoop, GeometryError> {
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for conn in &self.elements {
            for (a, b) in [(conn[0], conn[1]), (conn[1], conn[2]), (conn[2], conn[0])] {
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        // boundary edges keep the element orientation, so the loop runs counter-clockwise
        let mut next: HashMap<usize, (usize, usize)> = HashMap::new();
        for conn in &self.elements {
            for (a, b, m) in [(conn[0], conn[1], conn[3]), (conn[1], conn[2], conn[4]), (conn[2], conn[0], conn[5])] {
                let key = (a.min(b), a.max(b));
                if edge_count[&key] == 1 && next.insert(a, (m, b)).is_some() {
                    return Err(GeometryError::MeshDegenerate(format!(
                        "boundary node {a} starts two boundary edges"
                    )));
                }
            }
        }
        if next.is_empty() {
            return Err(GeometryError::MeshDegenerate("mesh has no boundary".into()));
        }
        let b = self.bounds;
        let start = *next
            .keys()
            .min_by(|&&p, &&q| {
                let d = |n: usize| {
                    let x = self.nodes[n];
                    ((x[0] - b.x0).powi(2) + (x[1] - b.y0).powi(2), n)
                };
                d(p).partial_cmp(&d(q)).unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty");
        let mut nodes = Vec::with_capacity(2 * next.len());
        let mut cur = start;
        loop {
            let (m, nb) = next[&cur];
            nodes.push(cur);
            nodes.push(m);
            cur = nb;
            if cur == start {
                break;
            }
            if nodes.len() > 2 * next.len() {
                return Err(GeometryError::MeshDegenerate("boundary does not close".into()));
            }
        }
        if nodes.len() != 2 * next.len() {
            return Err(GeometryError::MeshDegenerate(
                "boundary is not a single closed loop".into(),
            ));
        }
        let mut arc_length = Vec::with_capacity(nodes.len());
        let mut s = 0.0;
        for (k, &n) in nodes.iter().enumerate() {
            if k > 0 {
                let p = self.nodes[nodes[k - 1]];
                let q = self.nodes[n];
                s += ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            }
            arc_length.push(s);
        }
        let last = self.nodes[*nodes.last().expect("non-empty")];
        let first = self.nodes[nodes[0]];
        let perimeter = s + ((first[0] - last[0]).powi(2) + (first[1] - last[1]).powi(2)).sqrt();
        Ok(BoundaryLoop {
            nodes,
            arc_length,
            perimeter,
        })
    }
}

fn grid_counts(rect: &Rect, target_edge_length: f64) -> Result<(usize, usize), GeometryError> {
    if !(target_edge_length > 0.0) {
        return Err(GeometryError::InvalidParameters(format!(
            "target edge length {target_edge_length} must be positive"
        )));
    }
    let nx = ((rect.width / target_edge_length) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((rect.height / target_edge_length) - 1e-9).ceil().max(1.0) as usize;
    Ok((nx, ny))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Inclusion, PackingOptions};

    fn unit() -> Mesh {
        Mesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 1, 1, |_| Phase::Matrix).unwrap()
    }

    #[test]
    fn single_cell_split() {
        let m = unit();
        assert_eq!(m.element_count(), 2);
        assert_eq!(m.node_count(), 9);
        // 4 corners + 4 edge midpoints on the boundary, diagonal midpoint inside
        assert_eq!(m.boundary().len(), 8);
        assert!(m.nodes().contains(&[0.5, 0.5]));
        assert!((m.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mid_edge_nodes_at_midpoints() {
        let m = Mesh::structured(Rect::new(0.0, 0.0, 3.0, 2.0), 5, 3, |_| Phase::Matrix).unwrap();
        for conn in m.elements() {
            for (a, b, mid) in [(0, 1, 3), (1, 2, 4), (2, 0, 5)] {
                let (p, q, r) = (m.nodes()[conn[a]], m.nodes()[conn[b]], m.nodes()[conn[mid]]);
                assert!((0.5 * (p[0] + q[0]) - r[0]).abs() < 1e-14);
                assert!((0.5 * (p[1] + q[1]) - r[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn boundary_loop_is_ccw_and_complete() {
        let m = Mesh::structured(Rect::new(1.0, 2.0, 3.0, 2.0), 6, 4, |_| Phase::Matrix).unwrap();
        let b = m.boundary();
        assert_eq!(b.len(), 4 * (6 + 4));
        assert_eq!(m.nodes()[b.nodes[0]], [1.0, 2.0]);
        // second node walks along the bottom edge
        assert!(m.nodes()[b.nodes[1]][1] == 2.0 && m.nodes()[b.nodes[1]][0] > 1.0);
        assert!((b.perimeter - 10.0).abs() < 1e-12);
        // equal spacing
        for w in b.arc_length.windows(2) {
            assert!((w[1] - w[0] - 0.25).abs() < 1e-12);
        }
        // exactly the nodes on the rectangle edges
        let on_edge = m
            .nodes()
            .iter()
            .filter(|p| p[0] == 1.0 || p[0] == 4.0 || p[1] == 2.0 || p[1] == 4.0)
            .count();
        assert_eq!(on_edge, b.len());
        let mut sorted = b.nodes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), b.len());
    }

    #[test]
    fn homogeneous_micro_gives_matrix_labels() {
        let micro = Microstructure::generate([4.0, 4.0], 0, 1.0, 0.05, 1, PackingOptions::default()).unwrap();
        let m = Mesh::generate(&micro, 0.5).unwrap();
        assert!(m.gauss_material().iter().flatten().all(|&p| p == Phase::Matrix));
        assert!((m.area() - 16.0).abs() < 1e-10 * 16.0);
        assert!(m.min_jacobian() > 0.0);
    }

    #[test]
    fn labels_agree_with_indicator() {
        let micro = Microstructure::generate([6.0, 6.0], 8, 1.0, 0.05, 11, PackingOptions::default()).unwrap();
        let m = Mesh::generate(&micro, 0.3).unwrap();
        for e in 0..m.element_count() {
            let gp = m.gauss_point_coords(e);
            for q in 0..3 {
                assert_eq!(m.gauss_material()[e][q], Phase::from_indicator(micro.indicator(gp[q])));
            }
        }
        assert!(m.gauss_material().iter().flatten().any(|&p| p == Phase::Inclusion));
    }

    #[test]
    fn boundary_node_count_helper() {
        let w = Rect::new(0.0, 0.0, 4.0, 4.0);
        assert_eq!(cells_for_boundary_nodes(&w, 128).unwrap(), (16, 16));
        assert!(cells_for_boundary_nodes(&w, 244).is_ok());
        assert!(cells_for_boundary_nodes(&w, 10).is_err());
    }

    #[test]
    fn mve_window_checks() {
        let micro = Microstructure {
            domain_size: [10.0, 10.0],
            inclusions: vec![Inclusion {
                center: [3.2, 5.0],
                diameter: 1.0,
            }],
            min_gap: 0.05,
            seed: 0,
        };
        let dns = Mesh::generate(&micro, 0.5).unwrap();
        let full = Mesh::extract_mve(&micro, &dns, micro.domain(), 0.5).unwrap();
        assert!((full.area() - dns.area()).abs() < 1e-10);
        let err = Mesh::extract_mve(&micro, &dns, Rect::new(8.0, 8.0, 4.0, 4.0), 0.5).unwrap_err();
        assert!(matches!(err, GeometryError::WindowOutsideDomain { .. }));
    }

    #[test]
    fn sides_partition_boundary() {
        let m = Mesh::structured(Rect::new(0.0, 0.0, 2.0, 2.0), 4, 4, |_| Phase::Matrix).unwrap();
        assert_eq!(m.nodes_on_side(Side::Left).len(), 9);
        assert_eq!(m.nodes_on_side(Side::Right).len(), 9);
        assert!(m.nodes_on_side(Side::Right).iter().all(|&n| m.nodes()[n][0] == 2.0));
    }
}
