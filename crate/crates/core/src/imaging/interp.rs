use super::{Image, PixelField};
use crate::par::Execution;
use crate::Vec2;
use serde::{Deserialize, Serialize};

/// Separable four-tap interpolation kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Tensor product of cubic Lagrange polynomials through the four nearest
    /// samples; reproduces every bicubic polynomial.
    #[default]
    CubicLagrange,
    /// Keys convolution kernel with `a = -0.5`; reproduces quadratics.
    Keys,
}

impl Interpolation {
    /// Weights of samples `-1, 0, 1, 2` around the point at offset `t` in
    /// `[0, 1)`.
    pub fn weights(self, t: f64) -> [f64; 4] {
        match self {
            Interpolation::CubicLagrange => {
                let (a, b, c) = (t + 1.0, t - 1.0, t - 2.0);
                [-t * b * c / 6.0, a * b * c / 2.0, -a * t * c / 2.0, a * t * b / 6.0]
            }
            Interpolation::Keys => {
                let t2 = t * t;
                let t3 = t2 * t;
                [
                    -0.5 * t3 + t2 - 0.5 * t,
                    1.5 * t3 - 2.5 * t2 + 1.0,
                    -1.5 * t3 + 2.0 * t2 + 0.5 * t,
                    0.5 * t3 - 0.5 * t2,
                ]
            }
        }
    }
}

/// Interpolated value at continuous pixel coordinates `p`. Taps outside the
/// image are clamped to the edge; the flag is false when any tap with a
/// non-zero weight had to be clamped.
pub fn sample(img: &Image, p: Vec2, interp: Interpolation) -> (f64, bool) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let fx = p[0].floor();
    let fy = p[1].floor();
    if !fx.is_finite() || !fy.is_finite() {
        return (f64::NAN, false);
    }
    let wx = interp.weights(p[0] - fx);
    let wy = interp.weights(p[1] - fy);
    let (ix, iy) = (fx as isize, fy as isize);
    let vals = img.values();
    let mut valid = true;
    let mut acc = 0.0;
    for (dy, &wyj) in wy.iter().enumerate() {
        let y = iy + dy as isize - 1;
        if wyj != 0.0 && !(0..h).contains(&y) {
            valid = false;
        }
        let row = y.clamp(0, h - 1) as usize * w as usize;
        let mut r = 0.0;
        for (dx, &wxi) in wx.iter().enumerate() {
            let x = ix + dx as isize - 1;
            if wxi != 0.0 && wyj != 0.0 && !(0..w).contains(&x) {
                valid = false;
            }
            r += wxi * vals[row + x.clamp(0, w - 1) as usize];
        }
        acc += wyj * r;
    }
    (acc, valid)
}

/// Image sampled at displaced positions, with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedImage {
    pub image: Image,
    pub valid: Vec<bool>,
}

/// `out(X) = f(X + u(X))` on the grid of `f`, where `u` is given in physical
/// units at every pixel of that grid. Pixels where `u` is undefined keep the
/// value of `f` and are flagged invalid.
pub fn warp_image(f: &Image, u: &PixelField, interp: Interpolation) -> WarpedImage {
    warp_image_with(f, u, interp, Execution::default())
}

pub fn warp_image_with(f: &Image, u: &PixelField, interp: Interpolation, exec: Execution) -> WarpedImage {
    let grid = f.grid();
    let inv = 1.0 / grid.pixel_size;
    let out = exec.map(grid.len(), |k| {
        if !u.defined()[k] {
            return (f.values()[k], false);
        }
        let d = u.values()[k];
        let p = [(k % grid.width) as f64 + d[0] * inv, (k / grid.width) as f64 + d[1] * inv];
        sample(f, p, interp)
    });
    let (values, valid): (Vec<f64>, Vec<bool>) = out.into_iter().unzip();
    WarpedImage {
        image: Image { grid: *grid, values },
        valid,
    }
}

/// Warps only the listed pixels; `u[m]` is the displacement at `pixels[m]`.
pub(crate) fn warp_pixels(
    f: &Image,
    pixels: &[usize],
    u: &[Vec2],
    interp: Interpolation,
    exec: Execution,
) -> (Vec<f64>, Vec<bool>) {
    let grid = f.grid();
    let inv = 1.0 / grid.pixel_size;
    exec.map(pixels.len(), |m| {
        let k = pixels[m];
        let p = [(k % grid.width) as f64 + u[m][0] * inv, (k / grid.width) as f64 + u[m][1] * inv];
        sample(f, p, interp)
    })
    .into_iter()
    .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{generate_speckle, Grid, SpeckleSpec};
    use proptest::prelude::*;

    const KINDS: [Interpolation; 2] = [Interpolation::CubicLagrange, Interpolation::Keys];

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 0.25, [0.0, 0.0]).unwrap()
    }

    fn speckle(seed: u64) -> Image {
        generate_speckle(&SpeckleSpec { seed, ..Default::default() }, &grid(40)).unwrap()
    }

    #[test]
    fn weights_partition_unity() {
        for kind in KINDS {
            for k in 0..100 {
                let w = kind.weights(k as f64 / 100.0);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
            assert_eq!(kind.weights(0.0).map(|v| v.abs()), [0.0, 1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn constant_image_is_preserved() {
        let img = Image::constant(grid(12), 123.25);
        for kind in KINDS {
            for &p in &[[3.3, 4.7], [5.5, 5.5], [0.01, 10.9]] {
                assert!((sample(&img, p, kind).0 - 123.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let b = |x: f64, y: f64| 3.0 + 0.5 * x - 0.2 * y + 0.03 * x * x * y - 0.01 * y * y * y + 0.02 * x * x * x;
        let g = grid(20);
        let img = Image::from_fn(g, |i, j| b(i as f64, j as f64));
        let u = PixelField::from_fn(g, |x| [0.13 * (x[1] * 2.0).sin(), 0.08 * x[0] - 0.05]);
        let out = warp_image(&img, &u, Interpolation::CubicLagrange);
        for k in 0..g.len() {
            if !out.valid[k] {
                continue;
            }
            let (i, j) = ((k % 20) as f64, (k / 20) as f64);
            let d = u.values()[k];
            let e = b(i + d[0] / 0.25, j + d[1] / 0.25);
            assert!((out.image.values()[k] - e).abs() < 1e-9 * e.abs().max(1.0));
        }
        assert!(out.valid.iter().filter(|&&v| v).count() > 200);
    }

    #[test]
    fn keys_does_not_reproduce_cubics() {
        let img = Image::from_fn(grid(12), |i, _| (i as f64).powi(3));
        let (v, _) = sample(&img, [5.25, 5.0], Interpolation::Keys);
        assert!((v - 5.25f64.powi(3)).abs() > 1e-2);
    }

    #[test]
    fn out_of_range_is_flagged() {
        let img = speckle(1);
        assert!(!sample(&img, [0.5, 10.0], Interpolation::CubicLagrange).1);
        assert!(sample(&img, [0.0, 0.0], Interpolation::CubicLagrange).1);
        assert!(sample(&img, [1.5, 38.0], Interpolation::CubicLagrange).1);
        assert!(!sample(&img, [38.5, 5.0], Interpolation::CubicLagrange).1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn zero_warp_is_identity(seed in 0u64..1000) {
            let img = speckle(seed);
            let u = PixelField::from_fn(*img.grid(), |_| [0.0, 0.0]);
            for kind in KINDS {
                let out = warp_image(&img, &u, kind);
                prop_assert_eq!(out.image.values(), img.values());
                prop_assert!(out.valid.iter().all(|&v| v));
            }
        }

        #[test]
        fn integer_shift_is_exact(seed in 0u64..1000, sx in -3i32..=3, sy in -3i32..=3) {
            let img = speckle(seed);
            let u = PixelField::from_fn(*img.grid(), |_| [sx as f64 * 0.25, sy as f64 * 0.25]);
            let out = warp_image(&img, &u, Interpolation::CubicLagrange);
            for j in 0..40i32 {
                for i in 0..40i32 {
                    let k = (j * 40 + i) as usize;
                    if out.valid[k] {
                        let src = img.get((i + sx) as usize, (j + sy) as usize);
                        prop_assert_eq!(out.image.values()[k], src);
                    }
                }
            }
        }
    }
}
