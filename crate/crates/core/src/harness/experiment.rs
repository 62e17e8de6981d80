use super::boundary::{dns_boundary_max, extract_boundary, perturb_boundary, smooth_boundary};
use super::metrics::{boundary_error, parameter_error};
use super::{Config, Dataset, HarnessError, Method, PerturbationKind, PerturbationSpec};
use crate::correlation::PriorSettings;
use crate::fem::{LoadCase, MaterialParams};
use crate::forward::{ForwardModel, Kinematics, Posterior};
use crate::idic::{self, IdicError, IdicResult};
use crate::imaging::add_noise;
use crate::mha::{self, BoundaryReduction, Chain, PosteriorSummary, ProposalSettings};
use crate::par::Execution;
use crate::Vec2;
use serde::{Deserialize, Serialize};

/// One identification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub case: LoadCase,
    pub method: Method,
    pub perturbation: PerturbationSpec,
    /// Selects the image-noise and chain streams.
    pub realization: u64,
}

/// Result of one identification run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    /// Identified `[G1, K1, G2, K2]`; fixed moduli keep their reference value
    /// and sampled runs report posterior modes.
    pub moduli: [f64; 4],
    pub errors: [f64; 4],
    pub bc_error_initial: Option<f64>,
    pub bc_error_final: Option<f64>,
    /// Final DIC cost for deterministic runs.
    pub cost: Option<f64>,
    pub acceptance_rate: Option<f64>,
    /// Gauss-Newton iterations or chain length.
    pub iterations: usize,
    pub converged: bool,
    pub names: Vec<String>,
    pub idic: Option<IdicResult>,
    pub chain: Option<Chain>,
    pub summary: Option<PosteriorSummary>,
}

/// Exact MVE boundary data and the perturbed data handed to the method.
pub fn applied_boundary(
    dataset: &Dataset,
    case: LoadCase,
    p: &PerturbationSpec,
    exec: Execution,
) -> Result<(Vec<Vec2>, Vec<Vec2>), HarnessError> {
    p.validate()?;
    let u = &dataset.case(case).u_dns;
    let exact = extract_boundary(u, &dataset.mve_mesh)?;
    let applied = match p.kind {
        PerturbationKind::None => exact.clone(),
        PerturbationKind::Smooth => smooth_boundary(
            u,
            &dataset.mve_mesh,
            p.epsilon,
            dataset.config.geometry.diameter,
            dataset.grid().pixel_size,
            exec,
        )?,
        PerturbationKind::Noise => perturb_boundary(&exact, dns_boundary_max(u), p.sigma_bc, p.seed),
    };
    Ok((exact, applied))
}

fn fixed_material(reference: MaterialParams, fix: &str) -> Result<MaterialParams, HarnessError> {
    let idx = MaterialParams::index_of(fix).ok_or_else(|| HarnessError::Config(format!("unknown modulus `{fix}`")))?;
    Ok(MaterialParams::new(reference.values[0], reference.values[1], reference.values[2], reference.values[3])
        .with_fixed(idx))
}

/// Runs `spec.method` once on noisy images of the dataset. `config` supplies
/// the method settings; the specimen comes from the dataset.
pub fn run_single(dataset: &Dataset, config: &Config, spec: &RunSpec, exec: Execution) -> Result<RunOutcome, HarnessError> {
    run_single_with(dataset, config, spec, exec, None)
}

/// As [`run_single`] with precomputed `(exact, applied)` boundary data.
pub fn run_single_with(
    dataset: &Dataset,
    config: &Config,
    spec: &RunSpec,
    exec: Execution,
    boundary: Option<&(Vec<Vec2>, Vec<Vec2>)>,
) -> Result<RunOutcome, HarnessError> {
    let case_name = spec.case.name();
    let r = spec.realization;
    let sigma_eta = config.imaging.sigma_eta;
    let f = add_noise(&dataset.f, sigma_eta, crate::seed::derive(config.seed, &format!("noise-f/{case_name}"), r));
    let g = add_noise(
        &dataset.case(spec.case).g,
        sigma_eta,
        crate::seed::derive(config.seed, &format!("noise-g/{case_name}"), r),
    );
    let (exact, applied) = match boundary {
        Some((e, a)) => (e.clone(), a.clone()),
        None => applied_boundary(dataset, spec.case, &spec.perturbation, exec)?,
    };
    let reference = config.material.params();

    let fix = match spec.method {
        Method::Idic | Method::BeIdic => Some(config.idic.fix.as_str()),
        Method::Mha | Method::MhaRelaxed => Some(config.mha.fix.as_str()),
        Method::MhaNonnorm => None,
    };
    let material = match fix {
        Some(name) => fixed_material(reference, name)?,
        None => MaterialParams {
            fixed: [false; 4],
            ..reference
        },
    };
    let stride = match spec.method {
        Method::BeIdic => config.idic.stride,
        _ => config.mha.stride,
    };
    let kinematics = if spec.method.has_free_boundary() {
        Kinematics::Free(BoundaryReduction::new(dataset.mve_mesh.boundary(), stride)?)
    } else {
        Kinematics::Fixed(applied.clone())
    };
    let model = ForwardModel::new(
        dataset.mve_mesh.clone(),
        &f,
        g,
        dataset.roi(),
        material,
        kinematics,
        config.solver,
    )?
    .with_interpolation(config.imaging.interpolation)
    .with_execution(exec);
    let names = model.names();
    let n_mat = model.n_mat();
    let free = model.free_moduli().to_vec();
    let ref_free: Vec<f64> = free.iter().map(|&i| reference.values[i]).collect();

    let bc_error_initial = if spec.method.has_free_boundary() {
        Some(boundary_error(&model.boundary_of(&model.pack(&reference, Some(&applied))?), &exact)?)
    } else {
        Some(boundary_error(&applied, &exact)?)
    };

    let mut out = RunOutcome {
        spec: *spec,
        moduli: reference.values,
        errors: [0.0; 4],
        bc_error_initial,
        bc_error_final: None,
        cost: None,
        acceptance_rate: None,
        iterations: 0,
        converged: false,
        names,
        idic: None,
        chain: None,
        summary: None,
    };

    match spec.method {
        Method::Idic | Method::BeIdic => {
            let start_mat = reference.scaled(config.idic.start_factor);
            let lambda0 = model.pack(&start_mat, Some(&applied))?;
            let res = match idic::gauss_newton_with(&model, &lambda0, &config.idic.gauss_newton, exec) {
                Ok(r) => r,
                Err(IdicError::MaxItersReached(r)) => *r,
                Err(e) => return Err(e.into()),
            };
            let m = model.material_of(&res.params);
            out.moduli = m.values;
            out.bc_error_final = Some(boundary_error(&model.boundary_of(&res.params), &exact)?);
            out.cost = Some(res.cost);
            out.iterations = res.iterations.len() - 1;
            out.converged = res.converged;
            out.idic = Some(res);
        }
        Method::Mha | Method::MhaRelaxed | Method::MhaNonnorm => {
            let m = &config.mha;
            let (steps, burn_in, fraction, mean_factor) = if spec.method == Method::Mha {
                (m.steps, m.burn_in, m.step_fraction, m.prior_mean_factor)
            } else {
                (m.relaxed_steps, m.relaxed_burn_in, m.relaxed_step_fraction, 1.0)
            };
            let mat_mean: Vec<f64> = ref_free.iter().map(|v| mean_factor * v).collect();
            let start_mat = reference.scaled(mean_factor);
            let start = model.pack(&start_mat, Some(&applied))?;
            let kin_center = start[n_mat..].to_vec();
            let e_bc = m.e_bc_fraction * exact.iter().map(|u| u[0].hypot(u[1])).fold(0.0, f64::max);
            let mat_sigma = if spec.method == Method::MhaNonnorm && m.flat_prior_nonnorm {
                f64::INFINITY
            } else {
                m.prior_sigma
            };
            let prior = PriorSettings {
                mat_mean,
                mat_sigma,
                kin_center,
                kin_halfwidth: e_bc,
                sigma_eta,
            };
            let posterior = Posterior::new(&model, prior)?;
            let chain_seed =
                crate::seed::derive(config.seed, &format!("mha/{case_name}/{}", spec.method.name()), r);
            let mut prop = ProposalSettings::from_reference(
                &ref_free,
                m.prior_sigma,
                fraction,
                model.n_kin(),
                m.kin_step_fraction,
                chain_seed,
            );
            if m.tune {
                prop = mha::tune_acceptance(&posterior, &start, &prop, m.pilot_steps)?;
            }
            let chain = mha::run_mha_stream(&posterior, &start, &prop, steps, burn_in, out.names.clone(), n_mat, r)?;
            let pivot = MaterialParams::index_of(&m.fix).expect("validated modulus name");
            let normalized = if spec.method == Method::MhaNonnorm {
                mha::normalize_chain(&chain, pivot, reference.values[pivot])?
            } else {
                chain.clone()
            };
            let summary = mha::summarize(&normalized, m.credible_level)?;
            let mode = summary.mode.clone();
            let mut moduli = reference.values;
            for (k, &i) in free.iter().enumerate() {
                moduli[i] = mode[k];
            }
            out.moduli = moduli;
            if spec.method.has_free_boundary() {
                let mut lam = mode.clone();
                lam[..n_mat].copy_from_slice(&ref_free);
                out.bc_error_final = Some(boundary_error(&model.boundary_of(&lam), &exact)?);
            } else {
                out.bc_error_final = out.bc_error_initial;
            }
            out.acceptance_rate = Some(chain.acceptance_rate());
            out.iterations = chain.len();
            out.converged = chain.acceptance_rate() > 0.0;
            out.chain = Some(chain);
            out.summary = Some(summary);
        }
    }
    let e = parameter_error(&out.moduli, &reference.values);
    out.errors.copy_from_slice(&e);
    Ok(out)
}
