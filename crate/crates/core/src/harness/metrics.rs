use super::HarnessError;
use crate::Vec2;

/// Signed relative error of each identified value.
pub fn parameter_error(estimate: &[f64], reference: &[f64]) -> Vec<f64> {
    estimate.iter().zip(reference).map(|(e, r)| (e - r) / r).collect()
}

/// `|u - u_ref| / |u_ref|` over all boundary components.
pub fn boundary_error(estimate: &[Vec2], reference: &[Vec2]) -> Result<f64, HarnessError> {
    if estimate.len() != reference.len() {
        return Err(HarnessError::LengthMismatch {
            expected: reference.len(),
            got: estimate.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, r) in estimate.iter().zip(reference) {
        for c in 0..2 {
            num += (e[c] - r[c]) * (e[c] - r[c]);
            den += r[c] * r[c];
        }
    }
    if den == 0.0 {
        return Err(HarnessError::ZeroReference);
    }
    Ok((num / den).sqrt())
}
