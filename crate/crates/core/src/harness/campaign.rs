use super::report::{ExperimentReport, RealizationRow};
use super::{
    applied_boundary, run_single_with, Config, Dataset, HarnessError, Method, PerturbationKind, PerturbationSpec,
    RunSpec,
};
use crate::fem::LoadCase;
use crate::par::Execution;

/// One cell of the campaign grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignJob {
    pub spec: RunSpec,
    pub level: f64,
}

/// Grid in report order: test, method, level, realization.
pub fn campaign_jobs(config: &Config) -> Vec<CampaignJob> {
    let c = &config.campaign;
    let mut jobs = Vec::new();
    for &case in &c.tests {
        for &method in &c.methods {
            for &level in &c.levels {
                for r in 0..c.realizations as u64 {
                    let seed = crate::seed::derive(config.seed, &format!("bc/{}", case.name()), r);
                    jobs.push(CampaignJob {
                        spec: RunSpec {
                            case,
                            method,
                            perturbation: PerturbationSpec::at_level(c.perturbation, level, seed),
                            realization: r,
                        },
                        level,
                    });
                }
            }
        }
    }
    jobs
}

/// Runs the configured campaign on the dataset with the default execution
/// policy and the configured worker cap.
pub fn run_campaign(dataset: &Dataset, config: &Config) -> Result<ExperimentReport, HarnessError> {
    run_campaign_with(dataset, config, Execution::default(), |_, _| {})
}

/// Campaign driver. Runs execute concurrently; a failed run becomes a
/// `failed` row. `progress(done, total)` is called after each run, possibly
/// from worker threads.
pub fn run_campaign_with(
    dataset: &Dataset,
    config: &Config,
    exec: Execution,
    progress: impl Fn(usize, usize) + Sync + Send,
) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    check_specimen(dataset, config)?;
    let jobs = campaign_jobs(config);
    let total = jobs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let rows = exec.with_threads(config.campaign.jobs, || {
        // Smoothed data depends only on the load case and level.
        let smoothed: Vec<(LoadCase, u64, Result<_, String>)> = if config.campaign.perturbation == PerturbationKind::Smooth {
            let keys: Vec<(LoadCase, f64)> = config
                .campaign
                .tests
                .iter()
                .flat_map(|&c| config.campaign.levels.iter().map(move |&l| (c, l)))
                .collect();
            exec.map(keys.len(), |k| {
                let (case, level) = keys[k];
                let p = PerturbationSpec::at_level(PerturbationKind::Smooth, level, 0);
                let b = applied_boundary(dataset, case, &p, exec).map_err(|e| e.to_string());
                (case, level.to_bits(), b)
            })
        } else {
            Vec::new()
        };
        exec.map(total, |k| {
            let job = &jobs[k];
            let cached = smoothed
                .iter()
                .find(|(c, l, _)| *c == job.spec.case && *l == job.level.to_bits())
                .map(|(_, _, b)| b);
            let result = match cached {
                Some(Err(msg)) => Err(msg.clone()),
                Some(Ok(b)) => run_single_with(dataset, config, &job.spec, exec, Some(b)).map_err(|e| e.to_string()),
                None => run_single_with(dataset, config, &job.spec, exec, None).map_err(|e| e.to_string()),
            };
            let row = match result {
                Ok(out) => RealizationRow::from_outcome(&out, job.level),
                Err(e) => RealizationRow::failed(
                    job.spec.case,
                    job.spec.method,
                    job.spec.perturbation.kind,
                    job.level,
                    job.spec.realization,
                    e,
                ),
            };
            progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1, total);
            row
        })
    });
    Ok(ExperimentReport::new(rows, config.campaign.realizations))
}

/// The campaign may change method settings but not the specimen.
pub fn check_specimen(dataset: &Dataset, config: &Config) -> Result<(), HarnessError> {
    let d = &dataset.config;
    let (a, b) = (&d.imaging, &config.imaging);
    let same_images = a.fov_pixels == b.fov_pixels && a.fov_size == b.fov_size && a.speckle == b.speckle;
    if d.geometry != config.geometry || d.material != config.material || !same_images {
        return Err(HarnessError::Config(
            "geometry, material and image settings must match the prepared dataset".into(),
        ));
    }
    Ok(())
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Idic, Method::BeIdic, Method::Mha, Method::MhaRelaxed, Method::MhaNonnorm];
}

impl LoadCase {
    pub const ALL: [LoadCase; 2] = [LoadCase::Tension, LoadCase::Shear];
}
