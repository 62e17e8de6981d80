//! Total Lagrangian finite elements for the plane-strain Neo-Hookean problem.

mod field;
mod material;
mod solver;

pub use field::DisplacementField;
pub use material::{
    energy_density, first_pk_stress, material_tangent, stress_and_tangent, Mat2, MaterialParams, Tangent,
    IDENTITY, MODULUS_NAMES,
};
pub use solver::{solve, solve_dns, FemProblem, ResponseDirection, SolveReport};

use crate::geometry::GeometryError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("non-positive Jacobian det F = {0}")]
    NonPositiveJacobian(f64),
    #[error("element {element} inverted (det F = {det})")]
    ElementInverted { element: usize, det: f64 },
    #[error("Newton iteration did not converge in increment {increment} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        increment: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid Dirichlet data: {0}")]
    InvalidDirichlet(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("field has {got} nodal values, mesh has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Incremental Newton-Raphson settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub n_increments: usize,
    /// Residual tolerance relative to the force scale of the increment.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            n_increments: 4,
            newton_tol: 1e-9,
            max_newton_iters: 25,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), FemError> {
        if self.n_increments < 1 {
            return Err(FemError::InvalidOptions("n_increments must be at least 1".into()));
        }
        if !(self.newton_tol > 0.0) {
            return Err(FemError::InvalidOptions("newton_tol must be positive".into()));
        }
        if self.max_newton_iters < 1 {
            return Err(FemError::InvalidOptions("max_newton_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Macroscopic load case applied to the left and right sides of the specimen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadCase {
    Tension,
    Shear,
}

impl LoadCase {
    /// Macroscopic deformation gradient `I + 0.1 e1 e1` or `I + 0.1 e2 e1`.
    pub fn macro_gradient(self) -> Mat2 {
        match self {
            LoadCase::Tension => [[1.1, 0.0], [0.0, 1.0]],
            LoadCase::Shear => [[1.0, 0.0], [0.1, 1.0]],
        }
    }

    /// Affine displacement `(F - I) X`.
    pub fn displacement(self, x: crate::Vec2) -> crate::Vec2 {
        let f = self.macro_gradient();
        [
            (f[0][0] - 1.0) * x[0] + f[0][1] * x[1],
            f[1][0] * x[0] + (f[1][1] - 1.0) * x[1],
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            LoadCase::Tension => "tension",
            LoadCase::Shear => "shear",
        }
    }
}

impl std::str::FromStr for LoadCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tension" => Ok(LoadCase::Tension),
            "shear" => Ok(LoadCase::Shear),
            other => Err(format!("unknown load case `{other}` (expected tension or shear)")),
        }
    }
}
