//! Forward model: parameter vector to warped deformed image on the ROI.
//!
//! A parameter vector is laid out as `[free moduli..., boundary entries...]`.
//! Boundary entries, when present, are the `x, y` displacements of the
//! retained boundary nodes, interleaved per node.

use crate::correlation::{self, CorrelationError, PriorSettings};
use crate::fem::{DisplacementField, FemError, FemProblem, MaterialParams, ResponseDirection, SolverOptions, MODULUS_NAMES};
use crate::geometry::Mesh;
use crate::imaging::{Image, ImagingError, Interpolation, PixelSampler, Roi};
use crate::mha::BoundaryReduction;
use crate::par::Execution;
use crate::Vec2;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// How the MVE boundary displacements enter the model.
#[derive(Debug, Clone)]
pub enum Kinematics {
    /// Prescribed values at every boundary loop node.
    Fixed(Vec<Vec2>),
    /// Unknowns at the retained nodes of a reduction.
    Free(BoundaryReduction),
}

/// Warped image samples at the ROI pixels and the displacement field behind
/// them.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub g_roi: Vec<f64>,
    pub valid: Vec<bool>,
    pub field: DisplacementField,
}

/// MVE solve followed by rasterization and warping of the deformed image.
#[derive(Debug)]
pub struct ForwardModel {
    problem: FemProblem,
    sampler: PixelSampler,
    g: Image,
    f_roi: Vec<f64>,
    material: MaterialParams,
    free: Vec<usize>,
    kinematics: Kinematics,
    opts: SolverOptions,
    interp: Interpolation,
    execution: Execution,
}

impl ForwardModel {
    /// `material` supplies the fixed moduli and the mask of free ones; `f` and
    /// `g` are the reference and deformed images on a common grid.
    pub fn new(
        mesh: Arc<Mesh>,
        f: &Image,
        g: Image,
        roi: Roi,
        material: MaterialParams,
        kinematics: Kinematics,
        opts: SolverOptions,
    ) -> Result<Self, ForwardError> {
        f.check_same_grid(&g)?;
        if roi.grid() != f.grid() {
            return Err(ForwardError::InvalidParameters("ROI grid differs from the images".into()));
        }
        let n_loop = mesh.boundary().len();
        match &kinematics {
            Kinematics::Fixed(v) if v.len() != n_loop => {
                return Err(ForwardError::InvalidParameters(format!(
                    "{} boundary values for {n_loop} boundary nodes",
                    v.len()
                )))
            }
            Kinematics::Free(r) if r.full_len() != n_loop => {
                return Err(ForwardError::InvalidParameters("reduction does not match the boundary loop".into()))
            }
            _ => {}
        }
        let sampler = PixelSampler::new(&mesh, roi)?;
        let f_roi = sampler.roi().pixels().iter().map(|&k| f.values()[k]).collect();
        let problem = FemProblem::boundary_controlled(mesh)?;
        Ok(ForwardModel {
            problem,
            sampler,
            g,
            f_roi,
            free: material.free_indices(),
            material,
            kinematics,
            opts,
            interp: Interpolation::default(),
            execution: Execution::default(),
        })
    }

    pub fn with_interpolation(mut self, interp: Interpolation) -> Self {
        self.interp = interp;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self.problem = self.problem.with_execution(execution);
        self
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.problem.mesh()
    }

    pub fn roi(&self) -> &Roi {
        self.sampler.roi()
    }

    pub fn f_roi(&self) -> &[f64] {
        &self.f_roi
    }

    pub fn kinematics(&self) -> &Kinematics {
        &self.kinematics
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    /// Indices (into `[G1, K1, G2, K2]`) of the free moduli.
    pub fn free_moduli(&self) -> &[usize] {
        &self.free
    }

    pub fn n_mat(&self) -> usize {
        self.free.len()
    }

    pub fn n_kin(&self) -> usize {
        match &self.kinematics {
            Kinematics::Fixed(_) => 0,
            Kinematics::Free(r) => 2 * r.reduced_len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_mat() + self.n_kin()
    }

    /// Column names: modulus names, then `ux<k>, uy<k>` per retained node.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.free.iter().map(|&i| MODULUS_NAMES[i].to_string()).collect();
        if let Kinematics::Free(r) = &self.kinematics {
            for k in 0..r.reduced_len() {
                names.push(format!("ux{k}"));
                names.push(format!("uy{k}"));
            }
        }
        names
    }

    /// Parameter vector from moduli and (when free) full boundary values.
    pub fn pack(&self, material: &MaterialParams, boundary: Option<&[Vec2]>) -> Result<Vec<f64>, ForwardError> {
        let mut v: Vec<f64> = self.free.iter().map(|&i| material.values[i]).collect();
        if let Kinematics::Free(r) = &self.kinematics {
            let b = boundary.ok_or_else(|| ForwardError::InvalidParameters("boundary values required".into()))?;
            if b.len() != r.full_len() {
                return Err(ForwardError::InvalidParameters("boundary length mismatch".into()));
            }
            v.extend(r.reduce(b).iter().flat_map(|u| *u));
        }
        Ok(v)
    }

    pub fn material_of(&self, lambda: &[f64]) -> MaterialParams {
        let mut m = self.material;
        for (k, &i) in self.free.iter().enumerate() {
            m.values[i] = lambda[k];
        }
        m
    }

    /// Boundary values at every loop node.
    pub fn boundary_of(&self, lambda: &[f64]) -> Vec<Vec2> {
        match &self.kinematics {
            Kinematics::Fixed(v) => v.clone(),
            Kinematics::Free(r) => {
                let kin = &lambda[self.n_mat()..];
                let reduced: Vec<Vec2> = kin.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                r.expand(&reduced)
            }
        }
    }

    /// Typical magnitude of each entry, for scaled norms and finite
    /// differences: the modulus itself, or the largest boundary displacement.
    pub fn scales(&self, lambda: &[f64]) -> Vec<f64> {
        let n_mat = self.n_mat();
        let kin_scale = lambda[n_mat..].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        lambda
            .iter()
            .enumerate()
            .map(|(k, v)| if k < n_mat { v.abs().max(1e-12) } else { kin_scale })
            .collect()
    }

    /// Solves the MVE for `lambda` and samples the warped deformed image on
    /// the ROI. `warm` is a nearby converged nodal field to start from.
    pub fn evaluate(&self, lambda: &[f64], warm: Option<&[Vec2]>) -> Result<ForwardOutput, ForwardError> {
        if lambda.len() != self.dim() {
            return Err(ForwardError::InvalidParameters(format!(
                "expected {} parameters, got {}",
                self.dim(),
                lambda.len()
            )));
        }
        let mat = self.material_of(lambda);
        if !mat.is_positive() {
            return Err(ForwardError::InvalidParameters(format!("non-positive moduli {:?}", mat.values)));
        }
        let boundary = self.boundary_of(lambda);
        let (field, _) = self.problem.solve_from(&mat, &boundary, &self.opts, warm)?;
        let u = self.sampler.sample(&field);
        let (g_roi, valid) =
            crate::imaging::warp_pixels(&self.g, self.sampler.roi().pixels(), &u, self.interp, self.execution);
        Ok(ForwardOutput { g_roi, valid, field })
    }

    /// Warped deformed image on the ROI for arbitrary nodal values on the
    /// MVE mesh.
    pub fn warp_nodal(&self, values: Vec<Vec2>) -> Result<(Vec<f64>, Vec<bool>), ForwardError> {
        let field = DisplacementField::new(self.mesh().clone(), values)?;
        let u = self.sampler.sample(&field);
        Ok(crate::imaging::warp_pixels(
            &self.g,
            self.sampler.roi().pixels(),
            &u,
            self.interp,
            self.execution,
        ))
    }

    /// Derivative of the converged nodal field `field` (at `lambda`) with
    /// respect to each parameter entry, linearized about that solution.
    pub fn field_derivatives(
        &self,
        lambda: &[f64],
        field: &DisplacementField,
    ) -> Result<Vec<Vec<Vec2>>, ForwardError> {
        let n_mat = self.n_mat();
        let mut directions: Vec<ResponseDirection> = self
            .free
            .iter()
            .map(|&i| {
                let mut moduli = [0.0; 4];
                moduli[i] = 1.0;
                ResponseDirection {
                    moduli,
                    boundary: Vec::new(),
                }
            })
            .collect();
        if let Kinematics::Free(r) = &self.kinematics {
            for j in 0..self.n_kin() {
                let mut reduced = vec![[0.0; 2]; r.reduced_len()];
                reduced[j / 2][j % 2] = 1.0;
                directions.push(ResponseDirection {
                    moduli: [0.0; 4],
                    boundary: r.expand(&reduced),
                });
            }
        }
        debug_assert_eq!(directions.len(), n_mat + self.n_kin());
        let mat = self.material_of(lambda);
        Ok(self.problem.linear_response(&mat, field.values(), &directions)?)
    }

    /// Residual sum of squares and pixel count of an evaluation.
    pub fn residual_sum(&self, out: &ForwardOutput) -> (f64, usize) {
        correlation::residual_sum(&self.f_roi, &out.g_roi, Some(&out.valid))
    }

    /// DIC cost `1/2 sum r^2 * pixel_area`.
    pub fn cost(&self, out: &ForwardOutput) -> f64 {
        0.5 * self.residual_sum(out).0 * self.roi().grid().pixel_area()
    }
}

/// Unnormalized log-posterior over the parameter vector of a forward model.
#[derive(Debug)]
pub struct Posterior<'a> {
    pub model: &'a ForwardModel,
    pub prior: PriorSettings,
}

impl<'a> Posterior<'a> {
    pub fn new(model: &'a ForwardModel, prior: PriorSettings) -> Result<Self, CorrelationError> {
        prior.validate()?;
        if prior.mat_mean.len() != model.n_mat() || prior.kin_center.len() != model.n_kin() {
            return Err(CorrelationError::InvalidPrior(format!(
                "prior sized {}+{}, model {}+{}",
                prior.mat_mean.len(),
                prior.kin_center.len(),
                model.n_mat(),
                model.n_kin()
            )));
        }
        Ok(Posterior { model, prior })
    }

    /// Log-posterior and the converged field (when the forward model ran).
    pub fn evaluate(
        &self,
        lambda: &[f64],
        warm: Option<&[Vec2]>,
    ) -> Result<(f64, Option<DisplacementField>), CorrelationError> {
        let n_mat = self.model.n_mat();
        let mut field = None;
        let lp = correlation::log_posterior(&lambda[..n_mat], &lambda[n_mat..], &self.prior, || {
            let out = self.model.evaluate(lambda, warm)?;
            let s = self.model.residual_sum(&out);
            field = Some(out.field);
            Ok::<_, ForwardError>(s)
        })?;
        Ok((lp, field))
    }
}
