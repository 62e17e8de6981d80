//! Speckle images, displacement rasterization and image warping.
//!
//! Pixel `(i, j)` has its centre at `origin + (i, j) * pixel_size`; row 0 is
//! the lowest `y`. Files written with [`Image::write_pgm`] flip rows so the
//! picture shows up the right way round in ordinary viewers.

mod interp;
mod io;
mod noise;
mod raster;
mod speckle;

pub use interp::{sample, warp_image, warp_image_with, Interpolation, WarpedImage};
pub(crate) use interp::warp_pixels;
pub use noise::add_noise;
pub use raster::{rasterize_displacement, render_deformed, PixelField, PixelSampler};
pub use speckle::{generate_speckle, SpecklePattern, SpeckleSpec};

use crate::geometry::{GeometryError, Rect};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("invalid image geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid speckle settings: {0}")]
    InvalidSpeckle(String),
    #[error("image geometries differ")]
    GeometryMismatch,
    #[error("could not invert the deformation at ({x}, {y})", x = .0[0], y = .0[1])]
    InverseMapFailed(Vec2),
    #[error("image file: {0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pixel lattice of an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    /// Length units per pixel.
    pub pixel_size: f64,
    /// Physical position of the centre of pixel `(0, 0)`.
    pub origin: Vec2,
}

impl Grid {
    pub fn new(width: usize, height: usize, pixel_size: f64, origin: Vec2) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidGeometry(format!("{width}x{height} image")));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(ImagingError::InvalidGeometry(format!("pixel size {pixel_size}")));
        }
        Ok(Grid {
            width,
            height,
            pixel_size,
            origin,
        })
    }

    /// Square grid of `pixels` per side whose pixel cells tile `area` exactly.
    pub fn covering(area: Rect, pixels: usize) -> Result<Self, ImagingError> {
        if (area.width - area.height).abs() > 1e-12 * area.width {
            return Err(ImagingError::InvalidGeometry("field of view must be square".into()));
        }
        let ps = area.width / pixels as f64;
        Grid::new(pixels, pixels, ps, [area.x0 + 0.5 * ps, area.y0 + 0.5 * ps])
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    /// Physical centre of pixel `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        [
            self.origin[0] + i as f64 * self.pixel_size,
            self.origin[1] + j as f64 * self.pixel_size,
        ]
    }

    pub fn center_of(&self, k: usize) -> Vec2 {
        self.center(k % self.width, k / self.width)
    }

    /// Continuous pixel coordinates of a physical point.
    pub fn to_pixel(&self, x: Vec2) -> Vec2 {
        [
            (x[0] - self.origin[0]) / self.pixel_size,
            (x[1] - self.origin[1]) / self.pixel_size,
        ]
    }

    /// Nearest pixel to a physical point, if inside the image.
    pub fn nearest_pixel(&self, x: Vec2) -> Option<(usize, usize)> {
        let p = self.to_pixel(x);
        let (i, j) = (p[0].round(), p[1].round());
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.width && (j as usize) < self.height)
            .then_some((i as usize, j as usize))
    }

    /// Area covered by the pixel cells.
    pub fn extent(&self) -> Rect {
        let ps = self.pixel_size;
        Rect::new(
            self.origin[0] - 0.5 * ps,
            self.origin[1] - 0.5 * ps,
            self.width as f64 * ps,
            self.height as f64 * ps,
        )
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size * self.pixel_size
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pixel_size == other.pixel_size
            && self.origin == other.origin
    }
}

/// Real-valued grayscale image, nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: Grid,
    values: Vec<f64>,
}

impl Image {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, ImagingError> {
        if values.len() != grid.len() {
            return Err(ImagingError::InvalidGeometry(format!(
                "{} values for a {}x{} image",
                values.len(),
                grid.width,
                grid.height
            )));
        }
        Ok(Image { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Image {
            values: vec![value; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(k % grid.width, k / grid.width)).collect();
        Image { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn pixel_size(&self) -> f64 {
        self.grid.pixel_size
    }

    pub fn origin(&self) -> Vec2 {
        self.grid.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Same pixel lattice, different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, ImagingError> {
        Image::new(self.grid, values)
    }

    pub fn check_same_grid(&self, other: &Image) -> Result<(), ImagingError> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(ImagingError::GeometryMismatch)
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

/// Pixels whose centres lie in a region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    grid: Grid,
    mask: Vec<bool>,
    pixels: Vec<usize>,
}

impl Roi {
    /// Pixels with centres inside `rect` (boundary included).
    pub fn from_rect(grid: Grid, rect: Rect) -> Self {
        let tol = 1e-9 * grid.pixel_size;
        let mask: Vec<bool> = (0..grid.len()).map(|k| rect.contains(grid.center_of(k), tol)).collect();
        Roi::from_mask(grid, mask)
    }

    pub fn full(grid: Grid) -> Self {
        Roi::from_mask(grid, vec![true; grid.len()])
    }

    pub fn from_mask(grid: Grid, mask: Vec<bool>) -> Self {
        let pixels = mask.iter().enumerate().filter_map(|(k, &m)| m.then_some(k)).collect();
        Roi { grid, mask, pixels }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Linear pixel indices, ascending.
    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Bounding box in pixel indices `(i0, j0, i1, j1)`, inclusive.
    pub fn pixel_bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let w = self.grid.width;
        let mut it = self.pixels.iter().map(|&k| (k % w, k / w));
        let first = it.next()?;
        Some(it.fold((first.0, first.1, first.0, first.1), |b, (i, j)| {
            (b.0.min(i), b.1.min(j), b.2.max(i), b.3.max(j))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_centres_round_trip() {
        let g = Grid::covering(Rect::new(1.99, 1.99, 6.02, 6.02), 256).unwrap();
        for (i, j) in [(0, 0), (17, 200), (255, 255), (128, 3)] {
            assert_eq!(g.nearest_pixel(g.center(i, j)), Some((i, j)));
            let p = g.to_pixel(g.center(i, j));
            assert!((p[0] - i as f64).abs() < 1e-9 && (p[1] - j as f64).abs() < 1e-9);
        }
        assert!(g.nearest_pixel([0.0, 0.0]).is_none());
        let e = g.extent();
        assert!((e.x0 - 1.99).abs() < 1e-12 && (e.width - 6.02).abs() < 1e-12);
    }

    #[test]
    fn roi_selects_centres_in_rect() {
        let g = Grid::new(10, 10, 1.0, [0.0, 0.0]).unwrap();
        let roi = Roi::from_rect(g, Rect::new(2.0, 3.0, 4.0, 2.0));
        assert_eq!(roi.len(), 5 * 3);
        assert_eq!(roi.pixel_bounds(), Some((2, 3, 6, 5)));
    }

    #[test]
    fn invalid_geometry() {
        assert!(Grid::new(0, 4, 1.0, [0.0; 2]).is_err());
        assert!(Grid::new(4, 4, -1.0, [0.0; 2]).is_err());
        let g = Grid::new(2, 2, 1.0, [0.0; 2]).unwrap();
        assert!(Image::new(g, vec![0.0; 3]).is_err());
    }
}
