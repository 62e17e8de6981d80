//! Plane-strain compressible Neo-Hookean material.
//!
//! The in-plane deformation gradient `F` is 2x2; the out-of-plane stretch is
//! fixed at 1, so `J = det F` and `tr C = tr(F^T F) + 1`. With
//! `I1bar = J^(-2/3) tr C` the stored energy is
//!
//! ```text
//! W = G/2 (I1bar - 3) + K/2 (ln J)^2
//! ```

use super::FemError;
use crate::geometry::Phase;
use serde::{Deserialize, Serialize};

/// 2x2 matrix, row-major: `m[i][j]`.
pub type Mat2 = [[f64; 2]; 2];

/// Fourth-order in-plane tensor `A[i][J][k][L]`.
pub type Tangent = [[[[f64; 2]; 2]; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Names of the four moduli in parameter order.
pub const MODULUS_NAMES: [&str; 4] = ["G1", "K1", "G2", "K2"];

/// Moduli `[G1, K1, G2, K2]` of the matrix (phase 1) and the inclusions
/// (phase 2), with a mask of entries held fixed during identification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub values: [f64; 4],
    #[serde(default)]
    pub fixed: [bool; 4],
}

impl MaterialParams {
    pub fn new(g1: f64, k1: f64, g2: f64, k2: f64) -> Self {
        MaterialParams {
            values: [g1, k1, g2, k2],
            fixed: [false; 4],
        }
    }

    /// Reference moduli of the virtual experiment: matrix `G = 1, K = 3`,
    /// inclusions `G = 4, K = 12` (both with Poisson ratio 0.35).
    pub fn reference() -> Self {
        MaterialParams::new(1.0, 3.0, 4.0, 12.0)
    }

    /// Index of a modulus by name (`"G1"`, `"K1"`, `"G2"`, `"K2"`).
    pub fn index_of(name: &str) -> Option<usize> {
        MODULUS_NAMES.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    pub fn with_fixed(mut self, index: usize) -> Self {
        self.fixed[index] = true;
        self
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..4).filter(|&i| !self.fixed[i]).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        MaterialParams {
            values: self.values.map(|v| v * c),
            fixed: self.fixed,
        }
    }

    /// `(G, K)` of a phase.
    pub fn moduli(&self, phase: Phase) -> (f64, f64) {
        match phase {
            Phase::Matrix => (self.values[0], self.values[1]),
            Phase::Inclusion => (self.values[2], self.values[3]),
        }
    }

    /// Poisson ratio `(3K - 2G) / (2 (3K + G))` of a phase.
    pub fn poisson(&self, phase: Phase) -> f64 {
        let (g, k) = self.moduli(phase);
        (3.0 * k - 2.0 * g) / (2.0 * (3.0 * k + g))
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0 && v.is_finite())
    }

    /// Positivity plus Poisson ratios in `(0, 0.5)`.
    pub fn validate(&self) -> Result<(), FemError> {
        if !self.is_positive() {
            return Err(FemError::InvalidMaterial(format!("moduli must be positive: {:?}", self.values)));
        }
        for phase in [Phase::Matrix, Phase::Inclusion] {
            let nu = self.poisson(phase);
            if !(nu > 0.0 && nu < 0.5) {
                return Err(FemError::InvalidMaterial(format!(
                    "Poisson ratio {nu} of {phase:?} outside (0, 0.5)"
                )));
            }
        }
        Ok(())
    }
}

fn det(f: &Mat2) -> f64 {
    f[0][0] * f[1][1] - f[0][1] * f[1][0]
}

/// `F^{-T}` for a 2x2 block with determinant `j`.
fn inv_transpose(f: &Mat2, j: f64) -> Mat2 {
    [[f[1][1] / j, -f[1][0] / j], [-f[0][1] / j, f[0][0] / j]]
}

fn tr_c(f: &Mat2) -> f64 {
    f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1] + 1.0
}

fn checked_det(f: &Mat2) -> Result<f64, FemError> {
    let j = det(f);
    if j > 0.0 {
        Ok(j)
    } else {
        Err(FemError::NonPositiveJacobian(j))
    }
}

pub fn energy_density(f: &Mat2, g: f64, k: f64) -> Result<f64, FemError> {
    let j = checked_det(f)?;
    let i1bar = j.powf(-2.0 / 3.0) * tr_c(f);
    let lnj = j.ln();
    Ok(0.5 * g * (i1bar - 3.0) + 0.5 * k * lnj * lnj)
}

/// First Piola-Kirchhoff stress `P = dW/dF`.
pub fn first_pk_stress(f: &Mat2, g: f64, k: f64) -> Result<Mat2, FemError> {
    let j = checked_det(f)?;
    Ok(stress_unchecked(f, g, k, j))
}

fn stress_unchecked(f: &Mat2, g: f64, k: f64, j: f64) -> Mat2 {
    let h = inv_transpose(f, j);
    let a = g * j.powf(-2.0 / 3.0);
    let t = tr_c(f) / 3.0;
    let kl = k * j.ln();
    std::array::from_fn(|i| std::array::from_fn(|jj| a * (f[i][jj] - t * h[i][jj]) + kl * h[i][jj]))
}

/// Stress and tangent `A = dP/dF` in one pass.
pub fn stress_and_tangent(f: &Mat2, g: f64, k: f64) -> Result<(Mat2, Tangent), FemError> {
    let j = checked_det(f)?;
    let h = inv_transpose(f, j);
    let a = g * j.powf(-2.0 / 3.0);
    let trc = tr_c(f);
    let t = trc / 3.0;
    let lnj = j.ln();
    let p: Mat2 = std::array::from_fn(|i| std::array::from_fn(|jj| a * (f[i][jj] - t * h[i][jj]) + k * lnj * h[i][jj]));
    let mut tan = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for jj in 0..2 {
            for kk in 0..2 {
                for l in 0..2 {
                    let delta = if i == kk && jj == l { 1.0 } else { 0.0 };
                    tan[i][jj][kk][l] = -2.0 / 3.0 * a * (h[kk][l] * f[i][jj] + f[kk][l] * h[i][jj])
                        + 2.0 / 9.0 * a * trc * h[kk][l] * h[i][jj]
                        + a * delta
                        + (a * t - k * lnj) * h[i][l] * h[kk][jj]
                        + k * h[kk][l] * h[i][jj];
                }
            }
        }
    }
    Ok((p, tan))
}

/// Tangent alone.
pub fn material_tangent(f: &Mat2, g: f64, k: f64) -> Result<Tangent, FemError> {
    stress_and_tangent(f, g, k).map(|(_, a)| a)
}
