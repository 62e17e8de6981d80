//! Deterministic identification by Gauss-Newton on the DIC cost.
//!
//! Sensitivities of the warped image come either from the linearized MVE
//! response (one factorization per iteration, central differences on the
//! warp only) or from central differences of the full forward model. The
//! update solves the scaled normal equations and is globalized by
//! backtracking.

use crate::forward::{ForwardError, ForwardModel, Kinematics};
use crate::par::Execution;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdicError {
    #[error("forward model failed{}: {source}", .index.map(|i| format!(" for parameter {i}")).unwrap_or_default())]
    Forward {
        index: Option<usize>,
        #[source]
        source: ForwardError,
    },
    #[error("normal matrix is singular (condition number {condition:e})")]
    SingularNormalMatrix { condition: f64 },
    #[error("no convergence after {} iterations", .0.iterations.len())]
    MaxItersReached(Box<IdicResult>),
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
}

/// How sensitivity columns are formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sensitivities {
    #[default]
    Tangent,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussNewtonOptions {
    pub sensitivities: Sensitivities,
    /// Finite-difference step relative to each parameter's scale.
    pub fd_step: f64,
    pub max_iters: usize,
    /// Stop once the scaled update norm falls below this.
    pub step_tol: f64,
    pub line_search_shrink: f64,
    pub max_shrinks: usize,
    /// Condition number above which the normal matrix counts as singular.
    pub max_condition: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        GaussNewtonOptions {
            sensitivities: Sensitivities::Tangent,
            fd_step: 1e-3,
            max_iters: 30,
            step_tol: 1e-5,
            line_search_shrink: 0.5,
            max_shrinks: 8,
            max_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub step_norm: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdicResult {
    pub params: Vec<f64>,
    pub cost: f64,
    /// Iteration 0 is the starting point.
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl IdicResult {
    /// Writes `iter,cost,step_norm,<names>`.
    pub fn write_trace<W: Write>(&self, mut w: W, names: &[String]) -> std::io::Result<()> {
        write!(w, "iter,cost,step_norm")?;
        for n in names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for r in &self.iterations {
            write!(w, "{},{:e},{:e}", r.iter, r.cost, r.step_norm)?;
            for p in &r.params {
                write!(w, ",{p:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Central-difference sensitivity columns of the warped image over the ROI.
/// Pixels invalid in any evaluation get a zero entry.
pub fn sensitivity_fields(
    model: &ForwardModel,
    lambda: &[f64],
    scales: &[f64],
    fd_step: f64,
    warm: Option<&[crate::Vec2]>,
    exec: Execution,
) -> Result<Vec<Vec<f64>>, IdicError> {
    let n = lambda.len();
    let evals = exec.try_map(2 * n, |m| {
        let i = m / 2;
        let h = fd_step * scales[i];
        let mut p = lambda.to_vec();
        p[i] += if m % 2 == 0 { h } else { -h };
        model
            .evaluate(&p, warm)
            .map_err(|source| IdicError::Forward { index: Some(i), source })
    })?;
    Ok((0..n)
        .map(|i| {
            let h = fd_step * scales[i];
            let (a, b) = (&evals[2 * i], &evals[2 * i + 1]);
            a.g_roi
                .iter()
                .zip(&b.g_roi)
                .enumerate()
                .map(|(k, (ga, gb))| {
                    if a.valid[k] && b.valid[k] {
                        (ga - gb) / (2.0 * h)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

/// Sensitivity columns from the linearized MVE response at the converged
/// field `out` for `lambda`: the warp is differenced along each nodal
/// derivative with step `fd_step * scales[i]`.
pub fn tangent_sensitivities(
    model: &ForwardModel,
    lambda: &[f64],
    out: &crate::forward::ForwardOutput,
    scales: &[f64],
    fd_step: f64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>, IdicError> {
    let derivs = model
        .field_derivatives(lambda, &out.field)
        .map_err(|source| IdicError::Forward { index: None, source })?;
    let base = out.field.values();
    exec.try_map(derivs.len(), |i| {
        let h = fd_step * scales[i];
        let shifted = |s: f64| -> Vec<crate::Vec2> {
            base.iter()
                .zip(&derivs[i])
                .map(|(u, d)| [u[0] + s * d[0], u[1] + s * d[1]])
                .collect()
        };
        let (ga, va) = model
            .warp_nodal(shifted(h))
            .map_err(|source| IdicError::Forward { index: Some(i), source })?;
        let (gb, vb) = model
            .warp_nodal(shifted(-h))
            .map_err(|source| IdicError::Forward { index: Some(i), source })?;
        Ok(ga
            .iter()
            .zip(&gb)
            .enumerate()
            .map(|(k, (a, b))| if va[k] && vb[k] { (a - b) / (2.0 * h) } else { 0.0 })
            .collect())
    })
}

/// Gauss-Newton over the model's parameter vector.
pub fn gauss_newton(model: &ForwardModel, lambda0: &[f64], opts: &GaussNewtonOptions) -> Result<IdicResult, IdicError> {
    gauss_newton_with(model, lambda0, opts, Execution::default())
}

/// Gauss-Newton with boundary unknowns; the model must carry free kinematics.
pub fn be_idic(model: &ForwardModel, lambda0: &[f64], opts: &GaussNewtonOptions) -> Result<IdicResult, IdicError> {
    if !matches!(model.kinematics(), Kinematics::Free(_)) {
        return Err(IdicError::InvalidSetup("boundary-enriched identification needs free kinematics".into()));
    }
    gauss_newton_with(model, lambda0, opts, Execution::default())
}

pub fn gauss_newton_with(
    model: &ForwardModel,
    lambda0: &[f64],
    opts: &GaussNewtonOptions,
    exec: Execution,
) -> Result<IdicResult, IdicError> {
    let n = model.dim();
    if lambda0.len() != n || n == 0 {
        return Err(IdicError::InvalidSetup(format!("start vector has {} entries, model {n}", lambda0.len())));
    }
    let scales = model.scales(lambda0);
    let mut lambda = lambda0.to_vec();
    let mut out = model
        .evaluate(&lambda, None)
        .map_err(|source| IdicError::Forward { index: None, source })?;
    let mut cost = model.cost(&out);
    let mut iterations = vec![IterationRecord {
        iter: 0,
        cost,
        step_norm: 0.0,
        params: lambda.clone(),
    }];
    for iter in 1..=opts.max_iters {
        let cols = match opts.sensitivities {
            Sensitivities::Tangent => tangent_sensitivities(model, &lambda, &out, &scales, opts.fd_step, exec)?,
            Sensitivities::FiniteDifference => {
                sensitivity_fields(model, &lambda, &scales, opts.fd_step, Some(out.field.values()), exec)?
            }
        };
        let residual: Vec<f64> = model
            .f_roi()
            .iter()
            .zip(&out.g_roi)
            .zip(&out.valid)
            .map(|((f, g), &v)| if v { f - g } else { 0.0 })
            .collect();
        // Scaled normal equations: H = D S^T S D, b = D S^T r.
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        let hs: Vec<(usize, usize, f64)> = exec.map(n * (n + 1) / 2, |m| {
            let (i, j) = tri_index(m);
            let v: f64 = cols[i].iter().zip(&cols[j]).map(|(a, c)| a * c).sum();
            (i, j, v * scales[i] * scales[j])
        });
        for (i, j, v) in hs {
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
        for i in 0..n {
            b[i] = scales[i] * cols[i].iter().zip(&residual).map(|(a, r)| a * r).sum::<f64>();
        }
        let eig = SymmetricEigen::new(h.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(max > 0.0) || condition > opts.max_condition {
            return Err(IdicError::SingularNormalMatrix { condition });
        }
        let floor = 1e-12 * h.trace();
        for i in 0..n {
            h[(i, i)] += floor;
        }
        let step = h
            .cholesky()
            .ok_or(IdicError::SingularNormalMatrix { condition })?
            .solve(&b);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_shrinks {
            let trial: Vec<f64> = (0..n).map(|i| lambda[i] + alpha * step[i] * scales[i]).collect();
            if let Ok(o) = model.evaluate(&trial, Some(out.field.values())) {
                let c = model.cost(&o);
                if c <= cost {
                    accepted = Some((trial, o, c));
                    break;
                }
            }
            alpha *= opts.line_search_shrink;
        }
        let step_norm = alpha * step.norm();
        let Some((trial, o, c)) = accepted else {
            // No descent along the Gauss-Newton direction: at the floor.
            return Ok(IdicResult {
                params: lambda,
                cost,
                iterations,
                converged: true,
            });
        };
        lambda = trial;
        out = o;
        cost = c;
        iterations.push(IterationRecord {
            iter,
            cost,
            step_norm,
            params: lambda.clone(),
        });
        if step_norm < opts.step_tol {
            return Ok(IdicResult {
                params: lambda,
                cost,
                iterations,
                converged: true,
            });
        }
    }
    Err(IdicError::MaxItersReached(Box::new(IdicResult {
        params: lambda,
        cost,
        iterations,
        converged: false,
    })))
}

/// Maps a linear index over the lower triangle (row-major) to `(i, j)`,
/// `j <= i`.
fn tri_index(m: usize) -> (usize, usize) {
    let i = ((((8 * m + 1) as f64).sqrt() - 1.0) / 2.0).floor() as usize;
    let (mut i, mut base) = (i, i * (i + 1) / 2);
    while base > m {
        i -= 1;
        base = i * (i + 1) / 2;
    }
    while base + i < m {
        i += 1;
        base = i * (i + 1) / 2;
    }
    (i, m - base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_indexing_covers_all_pairs() {
        let mut seen = Vec::new();
        for m in 0..5050 {
            let (i, j) = tri_index(m);
            assert!(j <= i && i < 100);
            seen.push((i, j));
        }
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 5050);
    }
}
