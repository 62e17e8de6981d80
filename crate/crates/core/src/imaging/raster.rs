use super::{Grid, Image, ImagingError, Roi, SpecklePattern};
use crate::fem::DisplacementField;
use crate::geometry::{ElementPoint, Mesh};
use crate::par::Execution;
use crate::Vec2;

/// Displacement per pixel in physical units, with a mask of pixels where it
/// is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelField {
    grid: Grid,
    values: Vec<Vec2>,
    defined: Vec<bool>,
}

impl PixelField {
    pub fn from_fn(grid: Grid, f: impl Fn(Vec2) -> Vec2) -> Self {
        PixelField {
            values: (0..grid.len()).map(|k| f(grid.center_of(k))).collect(),
            defined: vec![true; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn defined(&self) -> &[bool] {
        &self.defined
    }
}

/// Evaluates `u` at every pixel centre of `grid`.
pub fn rasterize_displacement(u: &DisplacementField, grid: &Grid) -> Result<PixelField, ImagingError> {
    let values = Execution::default().try_map(grid.len(), |k| {
        u.evaluate(grid.center_of(k)).map_err(|e| match e {
            crate::fem::FemError::Geometry(g) => ImagingError::Geometry(g),
            other => ImagingError::Format(other.to_string()),
        })
    })?;
    Ok(PixelField {
        grid: *grid,
        defined: vec![true; grid.len()],
        values,
    })
}

/// Pixel centres of a region of interest resolved once on a mesh, so that
/// any nodal field on that mesh can be rasterized by interpolation alone.
#[derive(Debug, Clone)]
pub struct PixelSampler {
    roi: Roi,
    points: Vec<ElementPoint>,
}

impl PixelSampler {
    pub fn new(mesh: &Mesh, roi: Roi) -> Result<Self, ImagingError> {
        let g = *roi.grid();
        let points = Execution::default().try_map(roi.len(), |m| mesh.locate(g.center_of(roi.pixels()[m])))?;
        Ok(PixelSampler { roi, points })
    }

    pub fn roi(&self) -> &Roi {
        &self.roi
    }

    /// Field values at the ROI pixels, in `roi().pixels()` order.
    pub fn sample(&self, u: &DisplacementField) -> Vec<Vec2> {
        self.points.iter().map(|p| u.evaluate_at(p)).collect()
    }

    /// Full-grid field, undefined outside the ROI.
    pub fn rasterize(&self, u: &DisplacementField) -> PixelField {
        let grid = *self.roi.grid();
        let mut values = vec![[0.0; 2]; grid.len()];
        for (&k, v) in self.roi.pixels().iter().zip(self.sample(u)) {
            values[k] = v;
        }
        PixelField {
            grid,
            values,
            defined: self.roi.mask().to_vec(),
        }
    }
}

/// Image of the deformed specimen: brightness is carried with the material,
/// so pixel `x` shows the reference pattern at the point `X` with
/// `X + u(X) = x`.
pub fn render_deformed(
    pattern: &SpecklePattern,
    grid: &Grid,
    u: &DisplacementField,
    exec: Execution,
) -> Result<Image, ImagingError> {
    let tol = 1e-12 * grid.extent().width.max(1.0);
    let values = exec.try_map(grid.len(), |k| {
        let x = grid.center_of(k);
        let mut p = x;
        for _ in 0..200 {
            let d = u.evaluate(p).map_err(|_| ImagingError::InverseMapFailed(x))?;
            let next = [x[0] - d[0], x[1] - d[1]];
            let step = (next[0] - p[0]).hypot(next[1] - p[1]);
            p = next;
            if step <= tol {
                return Ok(pattern.brightness(p));
            }
        }
        Err(ImagingError::InverseMapFailed(x))
    })?;
    Ok(Image { grid: *grid, values })
}
