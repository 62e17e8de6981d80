use super::FemError;
use crate::geometry::{ElementPoint, Mesh};
use crate::Vec2;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Nodal displacements on a mesh, interpolated with the element shape
/// functions.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    mesh: Arc<Mesh>,
    values: Vec<Vec2>,
}

impl DisplacementField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<Vec2>) -> Result<Self, FemError> {
        if values.len() != mesh.node_count() {
            return Err(FemError::LengthMismatch {
                expected: mesh.node_count(),
                got: values.len(),
            });
        }
        Ok(DisplacementField { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.node_count();
        DisplacementField {
            mesh,
            values: vec![[0.0; 2]; n],
        }
    }

    /// Nodal values of `f` evaluated at the node positions.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Vec2) -> Vec2) -> Self {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        DisplacementField { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec2] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec2> {
        self.values
    }

    /// Displacement at a physical point of the reference configuration.
    pub fn evaluate(&self, x: Vec2) -> Result<Vec2, FemError> {
        Ok(self.mesh.locate(x)?.interpolate(&self.mesh, &self.values))
    }

    /// Displacement at a point already resolved on this field's mesh.
    pub fn evaluate_at(&self, p: &ElementPoint) -> Vec2 {
        p.interpolate(&self.mesh, &self.values)
    }

    /// Largest nodal displacement magnitude over the given nodes.
    pub fn max_norm_over(&self, nodes: &[usize]) -> f64 {
        nodes
            .iter()
            .map(|&n| self.values[n][0].hypot(self.values[n][1]))
            .fold(0.0, f64::max)
    }

    /// Writes `id ux uy` lines with the mesh file's 0-based node ids.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, u) in self.values.iter().enumerate() {
            writeln!(w, "{i} {:.17e} {:.17e}", u[0], u[1])?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(mesh: Arc<Mesh>, r: R) -> Result<Self, FemError> {
        let mut values = vec![[f64::NAN; 2]; mesh.node_count()];
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(crate::geometry::GeometryError::from)?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| {
                FemError::Geometry(crate::geometry::GeometryError::Parse {
                    line: lineno + 1,
                    message,
                })
            };
            let mut it = line.split_whitespace();
            let id: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err("expected node id".into()))?;
            let mut u = [0.0; 2];
            for c in &mut u {
                *c = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err("expected displacement component".into()))?;
            }
            let slot = values
                .get_mut(id)
                .ok_or_else(|| parse_err(format!("node id {id} out of range")))?;
            *slot = u;
        }
        if let Some(i) = values.iter().position(|u| u[0].is_nan()) {
            return Err(FemError::InvalidDirichlet(format!("node {i} missing from displacement file")));
        }
        Ok(DisplacementField { mesh, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Phase, Rect};

    fn mesh() -> Arc<Mesh> {
        Arc::new(Mesh::structured(Rect::new(0.0, 0.0, 2.0, 1.0), 4, 3, |_| Phase::Matrix).unwrap())
    }

    #[test]
    fn nodes_return_stored_values() {
        let m = mesh();
        let f = DisplacementField::from_fn(m.clone(), |x| [x[0].sin(), x[1].cos() * x[0]]);
        for (i, &x) in m.nodes().iter().enumerate() {
            assert_eq!(f.evaluate(x).unwrap(), f.values()[i]);
        }
    }

    #[test]
    fn quadratic_fields_are_reproduced() {
        let m = mesh();
        let q = |x: Vec2| [1.0 + 0.3 * x[0] - 0.2 * x[1] * x[1] + 0.7 * x[0] * x[1], x[0] * x[0] - 0.5 * x[1]];
        let f = DisplacementField::from_fn(m, q);
        for &p in &[[0.13, 0.77], [1.91, 0.05], [1.0, 0.5], [0.333, 0.666]] {
            let v = f.evaluate(p).unwrap();
            let e = q(p);
            assert!((v[0] - e[0]).abs() < 1e-9 && (v[1] - e[1]).abs() < 1e-9);
        }
        assert!(f.evaluate([2.5, 0.5]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = mesh();
        let f = DisplacementField::from_fn(m.clone(), |x| [x[0] / 3.0, -x[1] * 1e-7]);
        let mut buf = Vec::new();
        f.write_text(&mut buf).unwrap();
        let g = DisplacementField::read_text(m, buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn length_is_checked() {
        assert!(DisplacementField::new(mesh(), vec![[0.0; 2]; 3]).is_err());
    }
}
