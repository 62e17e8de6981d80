//! Virtual laboratory for identifying micromechanical moduli of a two-phase
//! hyperelastic specimen from speckle images.
//!
//! The pipeline runs end to end:
//!
//! 1. [`geometry`] draws a random inclusion microstructure and meshes it with
//!    quadratic triangles.
//! 2. [`fem`] solves the plane-strain compressible Neo-Hookean problem under
//!    prescribed boundary displacements.
//! 3. [`imaging`] renders a speckle reference image and the matching deformed
//!    image, and warps images through displacement fields.
//! 4. [`correlation`] scores a candidate parameter vector against the images
//!    (DIC cost, Gaussian likelihood, priors, posterior).
//! 5. [`idic`] identifies parameters deterministically by Gauss-Newton, with or
//!    without boundary degrees of freedom; [`mha`] samples the posterior with
//!    random-walk Metropolis-Hastings.
//! 6. [`harness`] runs Monte-Carlo campaigns over perturbed boundary data.
//!
//! Data-parallel loops go through [`par::Execution`], which falls back to a
//! sequential loop when the `parallel` feature is disabled.

pub mod correlation;
pub mod fem;
pub mod forward;
pub mod geometry;
pub mod harness;
pub mod idic;
pub mod imaging;
pub mod mha;
pub mod par;
pub mod seed;

pub use fem::{DisplacementField, MaterialParams, SolverOptions};
pub use geometry::{Mesh, Microstructure, Rect};
pub use imaging::Image;

/// Planar point or vector.
pub type Vec2 = [f64; 2];

/// Crate version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
