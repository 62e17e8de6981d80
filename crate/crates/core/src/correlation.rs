//! Image-matching cost, likelihood, priors and posterior.
//!
//! Residuals are taken over the pixels of a region of interest whose warped
//! sample was valid. The likelihood models the difference of two images that
//! each carry independent Gaussian noise of standard deviation `sigma_eta`,
//! so the residual variance is `2 sigma_eta^2`.

use crate::imaging::{Image, ImagingError, Roi};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("region of interest and image geometry differ")]
    RoiMismatch,
    #[error("posterior evaluation failed: {0}")]
    PosteriorEvaluationFailed(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
}

/// Default image noise: 1% of the 8-bit dynamic range.
pub const DEFAULT_SIGMA_ETA: f64 = 2.55;

/// Sum of squared differences over paired samples where `valid` holds, and
/// the number of samples used.
pub fn residual_sum(f: &[f64], g: &[f64], valid: Option<&[bool]>) -> (f64, usize) {
    let mut s = 0.0;
    let mut n = 0;
    for (k, (a, b)) in f.iter().zip(g).enumerate() {
        if valid.is_none_or(|v| v[k]) {
            s += (a - b) * (a - b);
            n += 1;
        }
    }
    (s, n)
}

fn roi_sum(f: &Image, g_warped: &Image, roi: &Roi, valid: Option<&[bool]>) -> Result<(f64, usize), CorrelationError> {
    f.check_same_grid(g_warped)?;
    if roi.grid() != f.grid() {
        return Err(CorrelationError::RoiMismatch);
    }
    let (fv, gv) = (f.values(), g_warped.values());
    let mut s = 0.0;
    let mut n = 0;
    for &k in roi.pixels() {
        if valid.is_none_or(|v| v[k]) {
            s += (fv[k] - gv[k]) * (fv[k] - gv[k]);
            n += 1;
        }
    }
    Ok((s, n))
}

/// `1/2 sum (f - g)^2 * pixel_area` over the ROI.
pub fn dic_cost(f: &Image, g_warped: &Image, roi: &Roi, valid: Option<&[bool]>) -> Result<f64, CorrelationError> {
    let (s, _) = roi_sum(f, g_warped, roi, valid)?;
    Ok(0.5 * s * f.grid().pixel_area())
}

/// Log-likelihood from a residual sum of squares over `n_pixels` pixels.
pub fn log_likelihood_from_sum(sum_sq: f64, n_pixels: usize, sigma_eta: f64) -> f64 {
    let norm = (2.0 * sigma_eta * std::f64::consts::PI.sqrt()).ln();
    -(n_pixels as f64) * norm - sum_sq / (4.0 * sigma_eta * sigma_eta)
}

pub fn log_likelihood(
    f: &Image,
    g_warped: &Image,
    roi: &Roi,
    valid: Option<&[bool]>,
    sigma_eta: f64,
) -> Result<f64, CorrelationError> {
    let (s, n) = roi_sum(f, g_warped, roi, valid)?;
    Ok(log_likelihood_from_sum(s, n, sigma_eta))
}

/// Independent priors: Gaussian on the free moduli, uniform box on the
/// boundary displacement entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSettings {
    pub mat_mean: Vec<f64>,
    /// Standard deviation of the material prior; `f64::INFINITY` gives a flat
    /// (improper) prior.
    pub mat_sigma: f64,
    pub kin_center: Vec<f64>,
    pub kin_halfwidth: f64,
    pub sigma_eta: f64,
}

impl PriorSettings {
    pub fn validate(&self) -> Result<(), CorrelationError> {
        if !(self.mat_sigma > 0.0) {
            return Err(CorrelationError::InvalidPrior("mat_sigma must be positive".into()));
        }
        if !(self.kin_halfwidth >= 0.0) {
            return Err(CorrelationError::InvalidPrior("kin_halfwidth must be non-negative".into()));
        }
        if !(self.sigma_eta > 0.0) {
            return Err(CorrelationError::InvalidPrior("sigma_eta must be positive".into()));
        }
        Ok(())
    }
}

/// Log prior density; `-inf` outside the kinematic box.
pub fn log_prior(mat: &[f64], kin: &[f64], prior: &PriorSettings) -> f64 {
    debug_assert_eq!(mat.len(), prior.mat_mean.len());
    debug_assert_eq!(kin.len(), prior.kin_center.len());
    let mut lp = 0.0;
    if prior.mat_sigma.is_finite() {
        let s2 = prior.mat_sigma * prior.mat_sigma;
        let c = -0.5 * (2.0 * std::f64::consts::PI * s2).ln();
        for (x, m) in mat.iter().zip(&prior.mat_mean) {
            lp += c - 0.5 * (x - m) * (x - m) / s2;
        }
    }
    let e = prior.kin_halfwidth;
    for (x, c) in kin.iter().zip(&prior.kin_center) {
        if (x - c).abs() > e {
            return f64::NEG_INFINITY;
        }
    }
    if e > 0.0 {
        lp -= kin.len() as f64 * (2.0 * e).ln();
    }
    lp
}

/// `log_prior + log_likelihood`. The likelihood closure returns the residual
/// sum of squares and pixel count, and is not called when the prior vanishes.
pub fn log_posterior<E: std::fmt::Display>(
    mat: &[f64],
    kin: &[f64],
    prior: &PriorSettings,
    likelihood: impl FnOnce() -> Result<(f64, usize), E>,
) -> Result<f64, CorrelationError> {
    let lp = log_prior(mat, kin, prior);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    let (s, n) = likelihood().map_err(|e| CorrelationError::PosteriorEvaluationFailed(e.to_string()))?;
    Ok(lp + log_likelihood_from_sum(s, n, prior.sigma_eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Grid;

    fn grid() -> Grid {
        Grid::new(6, 5, 0.5, [0.0, 0.0]).unwrap()
    }

    fn prior() -> PriorSettings {
        PriorSettings {
            mat_mean: vec![1.0, 4.0, 12.0],
            mat_sigma: 1.0,
            kin_center: vec![0.1, -0.2],
            kin_halfwidth: 0.05,
            sigma_eta: 2.55,
        }
    }

    #[test]
    fn cost_closed_forms() {
        let f = Image::from_fn(grid(), |i, j| (i * j) as f64);
        let roi = Roi::full(grid());
        assert_eq!(dic_cost(&f, &f, &roi, None).unwrap(), 0.0);
        let g = f.with_values(f.values().iter().map(|v| v + 3.0).collect()).unwrap();
        let c = dic_cost(&f, &g, &roi, None).unwrap();
        assert!((c - 0.5 * 30.0 * 9.0 * 0.25).abs() < 1e-12);
        let mut valid = vec![true; 30];
        valid[0] = false;
        let c = dic_cost(&f, &g, &roi, Some(&valid)).unwrap();
        assert!((c - 0.5 * 29.0 * 9.0 * 0.25).abs() < 1e-12);
        let other = Image::constant(Grid::new(6, 5, 1.0, [0.0, 0.0]).unwrap(), 0.0);
        assert!(dic_cost(&f, &other, &roi, None).is_err());
    }

    #[test]
    fn likelihood_values() {
        let s = 2.55;
        let max = log_likelihood_from_sum(0.0, 10, s);
        assert!((max + 10.0 * (2.0 * s * std::f64::consts::PI.sqrt()).ln()).abs() < 1e-12);
        let one = log_likelihood_from_sum(s * s, 1, s) - log_likelihood_from_sum(0.0, 1, s);
        assert!((one + 0.25).abs() < 1e-15);
        let r = 37.0;
        let a = log_likelihood_from_sum(r, 5, s) - log_likelihood_from_sum(0.0, 5, s);
        let b = log_likelihood_from_sum(r, 5, 2.0 * s) - log_likelihood_from_sum(0.0, 5, 2.0 * s);
        assert!((a / b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn prior_shape() {
        let p = prior();
        let top = log_prior(&[1.0, 4.0, 12.0], &[0.1, -0.2], &p);
        assert!((log_prior(&[2.0, 4.0, 12.0], &[0.1, -0.2], &p) - (top - 0.5)).abs() < 1e-12);
        assert_eq!(log_prior(&[1.0, 4.0, 12.0], &[0.1 + 0.05 + 1e-9, -0.2], &p), f64::NEG_INFINITY);
        // Factorization into material and kinematic parts.
        let (m, k) = ([1.3, 3.5, 12.2], [0.12, -0.23]);
        let lhs = log_prior(&m, &k, &p);
        let rhs = log_prior(&m, &p.kin_center, &p) + log_prior(&p.mat_mean, &k, &p) - top;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn posterior_short_circuits() {
        let p = prior();
        let mut called = false;
        let v = log_posterior(&[1.0, 4.0, 12.0], &[1.0, 0.0], &p, || {
            called = true;
            Ok::<_, String>((0.0, 1))
        })
        .unwrap();
        assert_eq!(v, f64::NEG_INFINITY);
        assert!(!called);
        let e = log_posterior(&[1.0, 4.0, 12.0], &[0.1, -0.2], &p, || Err::<(f64, usize), _>("boom"));
        assert!(matches!(e, Err(CorrelationError::PosteriorEvaluationFailed(_))));
    }

    #[test]
    fn flat_prior_is_constant() {
        let p = PriorSettings {
            mat_sigma: f64::INFINITY,
            ..prior()
        };
        assert_eq!(
            log_prior(&[1.0, 4.0, 12.0], &[0.1, -0.2], &p),
            log_prior(&[100.0, 0.4, 1.0], &[0.1, -0.2], &p)
        );
    }
}
