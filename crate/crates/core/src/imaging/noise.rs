use super::Image;
use rand_distr::{Distribution, Normal};

/// Adds i.i.d. Gaussian noise of standard deviation `sigma` to every pixel.
pub fn add_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut out = img.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        let mut rng = crate::seed::stream(seed, "image-noise", 0);
        for v in out.values_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Grid;

    #[test]
    fn zero_sigma_is_identity() {
        let img = Image::constant(Grid::new(8, 8, 1.0, [0.0; 2]).unwrap(), 10.0);
        assert_eq!(add_noise(&img, 0.0, 3), img);
    }

    #[test]
    fn variance_matches_sigma() {
        let img = Image::constant(Grid::new(512, 512, 1.0, [0.0; 2]).unwrap(), 100.0);
        let sigma = 2.55;
        let noisy = add_noise(&img, sigma, 11);
        let n = img.values().len() as f64;
        let diffs: Vec<f64> = noisy.values().iter().map(|v| v - 100.0).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.03, "{var}");
        assert_ne!(add_noise(&img, sigma, 12), noisy);
        assert_eq!(add_noise(&img, sigma, 11), noisy);
    }
}
