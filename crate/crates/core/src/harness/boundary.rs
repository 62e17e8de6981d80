use super::HarnessError;
use crate::fem::DisplacementField;
use crate::geometry::Mesh;
use crate::par::Execution;
use crate::Vec2;
use rand::Rng;

/// Specimen displacement at every boundary loop node of the MVE mesh.
pub fn extract_boundary(u_dns: &DisplacementField, mve: &Mesh) -> Result<Vec<Vec2>, HarnessError> {
    mve.boundary()
        .nodes
        .iter()
        .map(|&n| Ok(u_dns.evaluate(mve.nodes()[n])?))
        .collect()
}

/// Pillbox average of the specimen displacement around each MVE boundary
/// node. The disk has diameter `epsilon * diameter` and is sampled on a grid
/// of the given spacing; samples outside the specimen are dropped and the
/// average renormalized.
pub fn smooth_boundary(
    u_dns: &DisplacementField,
    mve: &Mesh,
    epsilon: f64,
    diameter: f64,
    spacing: f64,
    exec: Execution,
) -> Result<Vec<Vec2>, HarnessError> {
    if !(epsilon >= 0.0) || !(diameter > 0.0) || !(spacing > 0.0) {
        return Err(HarnessError::Config(format!(
            "smoothing needs epsilon >= 0, positive diameter and spacing (got {epsilon}, {diameter}, {spacing})"
        )));
    }
    let radius = 0.5 * epsilon * diameter;
    if radius < spacing {
        return extract_boundary(u_dns, mve);
    }
    let reach = (radius / spacing).floor() as i64;
    let offsets: Vec<Vec2> = (-reach..=reach)
        .flat_map(|j| (-reach..=reach).map(move |i| [i as f64 * spacing, j as f64 * spacing]))
        .filter(|o| o[0] * o[0] + o[1] * o[1] <= radius * radius)
        .collect();
    let domain = u_dns.mesh().bounds();
    let tol = 1e-12 * domain.width.max(domain.height);
    let nodes = &mve.boundary().nodes;
    exec.try_map(nodes.len(), |k| {
        let x = mve.nodes()[nodes[k]];
        let mut sum = [0.0, 0.0];
        let mut count = 0usize;
        for o in &offsets {
            let p = [x[0] + o[0], x[1] + o[1]];
            if !domain.contains(p, tol) {
                continue;
            }
            let u = u_dns.evaluate(p)?;
            sum[0] += u[0];
            sum[1] += u[1];
            count += 1;
        }
        if count == 0 {
            return Err(HarnessError::Dataset(format!("no smoothing samples around ({}, {})", x[0], x[1])));
        }
        Ok([sum[0] / count as f64, sum[1] / count as f64])
    })
}

/// Adds `sigma_bc * scale * U(-1/2, 1/2)` to every component.
pub fn perturb_boundary(exact: &[Vec2], scale: f64, sigma_bc: f64, seed: u64) -> Vec<Vec2> {
    if sigma_bc == 0.0 {
        return exact.to_vec();
    }
    let amp = sigma_bc * scale;
    let mut rng = crate::seed::stream(seed, "boundary-noise", 0);
    exact
        .iter()
        .map(|u| {
            let a: f64 = rng.random_range(-0.5..0.5);
            let b: f64 = rng.random_range(-0.5..0.5);
            [u[0] + amp * a, u[1] + amp * b]
        })
        .collect()
}

/// Largest displacement magnitude on the specimen boundary.
pub fn dns_boundary_max(u_dns: &DisplacementField) -> f64 {
    u_dns.max_norm_over(&u_dns.mesh().boundary().nodes)
}
