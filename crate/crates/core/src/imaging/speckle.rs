use super::{Grid, Image, ImagingError};
use crate::par::Execution;
use crate::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Random pattern of Gaussian blobs on a flat background. Lengths are in
/// pixels of the grid the pattern is generated for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeckleSpec {
    /// Blobs per square pixel.
    pub blob_density: f64,
    pub blob_radius_range: [f64; 2],
    pub contrast_range: [f64; 2],
    pub background: f64,
    pub blur_sigma: f64,
    pub seed: u64,
}

impl Default for SpeckleSpec {
    fn default() -> Self {
        SpeckleSpec {
            blob_density: 0.02,
            blob_radius_range: [1.2, 2.5],
            contrast_range: [90.0, 170.0],
            background: 40.0,
            blur_sigma: 0.6,
            seed: 7,
        }
    }
}

impl SpeckleSpec {
    pub fn validate(&self) -> Result<(), ImagingError> {
        let [r0, r1] = self.blob_radius_range;
        let [c0, c1] = self.contrast_range;
        let bad = |m: &str| Err(ImagingError::InvalidSpeckle(m.into()));
        if !(self.blob_density >= 0.0 && self.blob_density.is_finite()) {
            return bad("blob density must be non-negative");
        }
        if !(r0 > 0.0 && r1 >= r0) {
            return bad("blob radii must be positive and ordered");
        }
        if !(c0.abs() <= 255.0 && c1.abs() <= 255.0 && c1 >= c0) {
            return bad("contrast must be ordered and within [-255, 255]");
        }
        if !(0.0..=255.0).contains(&self.background) {
            return bad("background must lie in [0, 255]");
        }
        if !(self.blur_sigma >= 0.0) {
            return bad("blur must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Blob {
    center: Vec2,
    /// `1 / (2 s^2)` of the blurred blob.
    inv_two_var: f64,
    amplitude: f64,
}

/// Continuous brightness field `x -> [0, 255]` in physical coordinates.
///
/// The pattern extends beyond the grid it was generated for, so it can be
/// sampled at points carried outside the field of view by a deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecklePattern {
    background: f64,
    blobs: Vec<Blob>,
    cell: f64,
    x0: Vec2,
    nx: usize,
    ny: usize,
    cell_start: Vec<usize>,
}

impl SpecklePattern {
    pub fn new(spec: &SpeckleSpec, grid: &Grid) -> Result<Self, ImagingError> {
        spec.validate()?;
        let ps = grid.pixel_size;
        let ext = grid.extent();
        let margin = 0.25 * ext.width.max(ext.height);
        let x0 = [ext.x0 - margin, ext.y0 - margin];
        let (w, h) = (ext.width + 2.0 * margin, ext.height + 2.0 * margin);
        let count = (spec.blob_density * (w / ps) * (h / ps)).round() as usize;
        let mut rng = crate::seed::stream(spec.seed, "speckle", 0);
        let b2 = spec.blur_sigma * spec.blur_sigma;
        let blobs: Vec<Blob> = (0..count)
            .map(|_| {
                let center = [x0[0] + rng.random::<f64>() * w, x0[1] + rng.random::<f64>() * h];
                let r = uniform(&mut rng, spec.blob_radius_range);
                let c = uniform(&mut rng, spec.contrast_range);
                let var = r * r + b2;
                Blob {
                    center,
                    inv_two_var: 1.0 / (2.0 * var * ps * ps),
                    amplitude: c * r * r / var,
                }
            })
            .collect();
        let max_s = (spec.blob_radius_range[1].powi(2) + b2).sqrt() * ps;
        let cell = (5.0 * max_s).max(ps);
        let nx = (w / cell).ceil().max(1.0) as usize;
        let ny = (h / cell).ceil().max(1.0) as usize;
        let cell_of = |p: Vec2| -> usize {
            let i = (((p[0] - x0[0]) / cell) as usize).min(nx - 1);
            let j = (((p[1] - x0[1]) / cell) as usize).min(ny - 1);
            j * nx + i
        };
        let mut order: Vec<usize> = (0..blobs.len()).collect();
        order.sort_by_key(|&k| (cell_of(blobs[k].center), k));
        let sorted: Vec<Blob> = order.iter().map(|&k| blobs[k]).collect();
        let mut cell_start = vec![0usize; nx * ny + 1];
        for b in &sorted {
            cell_start[cell_of(b.center) + 1] += 1;
        }
        for c in 0..nx * ny {
            cell_start[c + 1] += cell_start[c];
        }
        Ok(SpecklePattern {
            background: spec.background,
            blobs: sorted,
            cell,
            x0,
            nx,
            ny,
            cell_start,
        })
    }

    pub fn blob_count(&self) -> usize {
        self.blobs.len()
    }

    /// Brightness at a physical point, clipped to `[0, 255]`.
    pub fn brightness(&self, x: Vec2) -> f64 {
        let fi = ((x[0] - self.x0[0]) / self.cell).floor();
        let fj = ((x[1] - self.x0[1]) / self.cell).floor();
        let mut v = self.background;
        for dj in -1..=1 {
            let j = fj + dj as f64;
            if j < 0.0 || j >= self.ny as f64 {
                continue;
            }
            for di in -1..=1 {
                let i = fi + di as f64;
                if i < 0.0 || i >= self.nx as f64 {
                    continue;
                }
                let c = j as usize * self.nx + i as usize;
                for b in &self.blobs[self.cell_start[c]..self.cell_start[c + 1]] {
                    let dx = x[0] - b.center[0];
                    let dy = x[1] - b.center[1];
                    v += b.amplitude * (-(dx * dx + dy * dy) * b.inv_two_var).exp();
                }
            }
        }
        v.clamp(0.0, 255.0)
    }

    /// Samples the pattern at the pixel centres of `grid`.
    pub fn render(&self, grid: &Grid, exec: Execution) -> Image {
        let values = exec.map(grid.len(), |k| self.brightness(grid.center_of(k)));
        Image { grid: *grid, values }
    }
}

fn uniform(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Reference speckle image on `grid`.
pub fn generate_speckle(spec: &SpeckleSpec, grid: &Grid) -> Result<Image, ImagingError> {
    Ok(SpecklePattern::new(spec, grid)?.render(grid, Execution::default()))
}
