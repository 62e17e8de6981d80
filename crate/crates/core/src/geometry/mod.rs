//! Random two-phase microstructures and quadratic-triangle meshes.

mod element;
mod locate;
mod mesh;
mod mesh_io;
mod microstructure;

pub use element::{
    gauss_points, shape_gradients_local, shape_values, LocalPoint, GAUSS_POINTS, NODE_LOCAL_COORDS,
};
pub(crate) use element::shape_gradients_physical;
pub use locate::ElementPoint;
pub use mesh::{cells_for_boundary_nodes, BoundaryLoop, Mesh, Phase, Side};
pub use microstructure::{Inclusion, Microstructure, PackingOptions};

use crate::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("could not place inclusion {placed} of {requested} within {attempts} attempts")]
    PackingInfeasible {
        placed: usize,
        requested: usize,
        attempts: usize,
    },
    #[error("invalid microstructure parameters: {0}")]
    InvalidParameters(String),
    #[error("degenerate mesh: {0}")]
    MeshDegenerate(String),
    #[error("window {window:?} is not inside the domain {domain:?}")]
    WindowOutsideDomain { window: Rect, domain: Rect },
    #[error("point ({x}, {y}) lies outside the mesh", x = .0[0], y = .0[1])]
    PointOutsideMesh(Vec2),
    #[error("mesh file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle `[x0, x0 + width] x [y0, y0 + height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, width: f64, height: f64) -> Self {
        Rect {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn x1(&self) -> f64 {
        self.x0 + self.width
    }

    pub fn y1(&self) -> f64 {
        self.y0 + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Vec2 {
        [self.x0 + 0.5 * self.width, self.y0 + 0.5 * self.height]
    }

    /// Square of side `side` centred on `center`.
    pub fn centered(center: Vec2, width: f64, height: f64) -> Self {
        Rect::new(center[0] - 0.5 * width, center[1] - 0.5 * height, width, height)
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1() + tol && p[1] >= self.y0 - tol && p[1] <= self.y1() + tol
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x0 >= self.x0 - tol
            && other.y0 >= self.y0 - tol
            && other.x1() <= self.x1() + tol
            && other.y1() <= self.y1() + tol
    }
}
