use crate::{CampaignArgs, Cli, Command, IdentifyArgs};
use clap::Parser;
use microid::fem::LoadCase;
use microid::harness::{
    check_specimen, run_campaign_with, run_single, Config, Dataset, HarnessError, Method, PerturbationKind,
    PerturbationSpec, RunManifest, RunSpec, DATASET_FILES,
};
use microid::mha::MhaError;
use microid::par::Execution;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Mha(#[from] MhaError),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", .path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{what} differ from the manifest: {files:?}")]
    DigestMismatch { what: &'static str, files: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Arguments worth recording: everything except config and output paths.
fn recorded_args(raw: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in raw {
        if skip {
            skip = false;
            continue;
        }
        if a == "--config" || a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--config=") || a.starts_with("--out=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

pub fn dispatch(cli: Cli, raw: &[String]) -> Result<(), CliError> {
    if let Command::Rerun { manifest, out } = &cli.command {
        return rerun(manifest, out);
    }
    run(cli, None, recorded_args(raw)).map(|_| ())
}

/// Runs a command. `base` replaces config discovery (used by reruns).
fn run(cli: Cli, base: Option<Config>, recorded: Vec<String>) -> Result<RunManifest, CliError> {
    match &cli.command {
        Command::Prepare { out } => {
            let config = resolve_config(&cli, base, None)?;
            prepare(&config, out, recorded)
        }
        Command::Identify(args) => {
            let stored = dataset_config_text(&args.dataset)?;
            let config = resolve_config(&cli, base, Some(stored))?;
            identify(args, config, recorded)
        }
        Command::Campaign(args) => {
            let stored = match &args.dataset {
                Some(d) => Some(dataset_config_text(d)?),
                None => None,
            };
            let config = resolve_config(&cli, base, stored)?;
            campaign(args, config, recorded)
        }
        Command::Post(args) => {
            let config = resolve_config(&cli, base, None)?;
            crate::post::post(args, &config, recorded)
        }
        Command::Rerun { .. } => Err(CliError::Usage("a manifest cannot record a rerun".into())),
    }
}

fn dataset_config_text(dir: &Path) -> Result<String, CliError> {
    let p = dir.join("config.toml");
    std::fs::read_to_string(&p).map_err(|source| CliError::File { path: p, source })
}

fn resolve_config(cli: &Cli, base: Option<Config>, fallback: Option<String>) -> Result<Config, CliError> {
    let mut config = match (base, &cli.config, fallback) {
        (Some(c), _, _) => c,
        (None, Some(path), _) => Config::load(path)?,
        (None, None, Some(text)) => Config::from_toml_with_env(&text, std::env::vars())?,
        (None, None, None) => Config::from_toml_with_env("", std::env::vars())?,
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        config.campaign.jobs = Some(j);
    }
    config.validate()?;
    Ok(config)
}

fn rerun(manifest: &Path, out: &Path) -> Result<(), CliError> {
    let old = RunManifest::read(manifest)?;
    let config = Config::from_toml(&old.config)?;
    let mut argv = vec!["microid".to_string()];
    argv.extend(old.command.iter().cloned());
    argv.push("--out".into());
    argv.push(out.display().to_string());
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(format!("recorded command: {e}")))?;
    let new = run(cli, Some(config), old.command.clone())?;
    if new.inputs != old.inputs {
        let files = old
            .inputs
            .iter()
            .filter(|d| !new.inputs.contains(d))
            .map(|d| d.path.clone())
            .collect();
        return Err(CliError::DigestMismatch { what: "inputs", files });
    }
    let bad = old.output_mismatches(&new);
    if !bad.is_empty() {
        return Err(CliError::DigestMismatch {
            what: "outputs",
            files: bad,
        });
    }
    println!("reproduced {} output files", new.outputs.len());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::File {
            path: path.to_path_buf(),
            source,
        })
}

fn make_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::File {
        path: out.to_path_buf(),
        source,
    })
}

fn finish(mut manifest: RunManifest, out: &Path, files: &[PathBuf], start: Instant) -> Result<RunManifest, CliError> {
    manifest.outputs = RunManifest::digest_files(out, files)?;
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.write(&out.join(MANIFEST))?;
    Ok(manifest)
}

fn prepare(config: &Config, out: &Path, recorded: Vec<String>) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    make_out(out)?;
    let exec = Execution::default();
    let dataset = exec.with_threads(config.campaign.jobs, || Dataset::prepare(config, exec))?;
    let prepared = start.elapsed().as_secs_f64();
    let files = dataset.save(out)?;
    let mut manifest = RunManifest::new(recorded, config.seed, config.to_toml());
    manifest.timings.insert("prepare".into(), prepared);
    println!(
        "inclusions: {} (area fraction {:.3})",
        dataset.micro.inclusions.len(),
        dataset.micro.volume_fraction()
    );
    println!(
        "specimen mesh: {} nodes, {} elements; MVE mesh: {} nodes, {} boundary nodes",
        dataset.dns_mesh.node_count(),
        dataset.dns_mesh.element_count(),
        dataset.mve_mesh.node_count(),
        dataset.mve_mesh.boundary().len()
    );
    println!("images: {}x{} px, ROI {} px", dataset.f.width(), dataset.f.height(), dataset.roi().len());
    finish(manifest, out, &files, start)
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(CliError::Usage)
}

fn perturbation_kind(s: &str) -> Result<PerturbationKind, CliError> {
    match s {
        "none" => Ok(PerturbationKind::None),
        "smooth" => Ok(PerturbationKind::Smooth),
        "noise" => Ok(PerturbationKind::Noise),
        other => Err(CliError::Usage(format!("unknown perturbation `{other}` (expected none, smooth or noise)"))),
    }
}

fn dataset_inputs(dir: &Path) -> Result<Vec<microid::harness::FileDigest>, CliError> {
    let files: Vec<PathBuf> = DATASET_FILES.iter().map(|f| dir.join(f)).collect();
    let mut digests = RunManifest::digest_files(dir, &files)?;
    for d in &mut digests {
        d.path = format!("dataset/{}", d.path);
    }
    Ok(digests)
}

fn identify(args: &IdentifyArgs, mut config: Config, recorded: Vec<String>) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let method: Method = parse(&args.method)?;
    let case: LoadCase = parse(&args.test)?;
    let kind = perturbation_kind(&args.perturbation)?;
    if let Some(f) = &args.fix {
        config.idic.fix = f.clone();
        config.mha.fix = f.clone();
    }
    let relaxed = matches!(method, Method::MhaRelaxed | Method::MhaNonnorm);
    if let Some(n) = args.steps {
        if relaxed {
            config.mha.relaxed_steps = n;
        } else {
            config.mha.steps = n;
        }
    }
    if let Some(n) = args.burn_in {
        if relaxed {
            config.mha.relaxed_burn_in = n;
        } else {
            config.mha.burn_in = n;
        }
    }
    if let Some(s) = args.stride {
        config.idic.stride = s;
        config.mha.stride = s;
    }
    if args.tune {
        config.mha.tune = true;
    }
    config.validate()?;
    make_out(&args.out)?;
    let dataset = Dataset::load(&args.dataset)?;
    check_specimen(&dataset, &config)?;
    let inputs = dataset_inputs(&args.dataset)?;

    let seed = microid::seed::derive(config.seed, &format!("bc/{}", case.name()), args.realization);
    let spec = RunSpec {
        case,
        method,
        perturbation: PerturbationSpec::at_level(kind, args.level, seed),
        realization: args.realization,
    };
    let exec = Execution::default();
    let outcome = exec.with_threads(config.campaign.jobs, || run_single(&dataset, &config, &spec, exec))?;
    let mut files = Vec::new();

    let result = serde_json::json!({
        "test": case.name(),
        "method": method.name(),
        "perturbation": kind.name(),
        "level": args.level,
        "realization": args.realization,
        "names": outcome.names,
        "moduli": { "G1": outcome.moduli[0], "K1": outcome.moduli[1], "G2": outcome.moduli[2], "K2": outcome.moduli[3] },
        "relative_errors": { "G1": outcome.errors[0], "K1": outcome.errors[1], "G2": outcome.errors[2], "K2": outcome.errors[3] },
        "bc_error_initial": outcome.bc_error_initial,
        "bc_error_final": outcome.bc_error_final,
        "cost": outcome.cost,
        "acceptance_rate": outcome.acceptance_rate,
        "iterations": outcome.iterations,
        "converged": outcome.converged,
    });
    let p = args.out.join("result.json");
    let mut w = create(&p)?;
    serde_json::to_writer_pretty(&mut w, &result)?;
    writeln!(w)?;
    w.flush()?;
    files.push(p);

    if let Some(res) = &outcome.idic {
        let p = args.out.join("trace.csv");
        let mut w = create(&p)?;
        res.write_trace(&mut w, &outcome.names)?;
        w.flush()?;
        files.push(p);
    }
    if let Some(chain) = &outcome.chain {
        let p = args.out.join("chain.csv");
        let mut w = create(&p)?;
        chain.write_csv(&mut w)?;
        w.flush()?;
        files.push(p);
    }
    if let Some(summary) = &outcome.summary {
        let p = args.out.join("summary.txt");
        std::fs::write(&p, summary.to_report())?;
        files.push(p);
        let p = args.out.join("kde.csv");
        let mut w = create(&p)?;
        summary.write_kde_csv(&mut w)?;
        w.flush()?;
        files.push(p);
    }

    println!("{} on {} ({} {}):", method.name(), case.name(), kind.name(), args.level);
    for (k, name) in microid::fem::MODULUS_NAMES.iter().enumerate() {
        println!("  {name} = {:.6} (relative error {:+.4})", outcome.moduli[k], outcome.errors[k]);
    }
    if let Some(a) = outcome.acceptance_rate {
        println!("  acceptance rate {a:.3}");
    }
    if let Some(b) = outcome.bc_error_final {
        println!("  boundary error {b:.4e}");
    }
    let mut manifest = RunManifest::new(recorded, config.seed, config.to_toml());
    manifest.inputs = inputs;
    finish(manifest, &args.out, &files, start)
}

fn campaign(args: &CampaignArgs, mut config: Config, recorded: Vec<String>) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    if !args.method.is_empty() {
        config.campaign.methods = args.method.iter().map(|m| parse(m)).collect::<Result<_, _>>()?;
    }
    if let Some(f) = &args.fix {
        config.idic.fix = f.clone();
        config.mha.fix = f.clone();
    }
    if let Some(n) = args.steps {
        config.mha.steps = n;
        config.mha.relaxed_steps = n;
    }
    if let Some(n) = args.burn_in {
        config.mha.burn_in = n;
        config.mha.relaxed_burn_in = n;
    }
    config.validate()?;
    make_out(&args.out)?;
    let exec = Execution::default();
    let mut manifest = RunManifest::new(recorded, config.seed, config.to_toml());
    let dataset = match &args.dataset {
        Some(dir) => {
            manifest.inputs = dataset_inputs(dir)?;
            Dataset::load(dir)?
        }
        None => {
            let t = Instant::now();
            let d = exec.with_threads(config.campaign.jobs, || Dataset::prepare(&config, exec))?;
            manifest.timings.insert("prepare".into(), t.elapsed().as_secs_f64());
            d
        }
    };
    let t = Instant::now();
    let report = run_campaign_with(&dataset, &config, exec, |done, total| {
        eprintln!("[{done}/{total}] runs finished");
    })?;
    manifest.timings.insert("campaign".into(), t.elapsed().as_secs_f64());

    let rp = args.out.join("realizations.csv");
    let mut w = create(&rp)?;
    report.write_realizations_csv(&mut w)?;
    w.flush()?;
    let ap = args.out.join("aggregates.csv");
    let mut w = create(&ap)?;
    report.write_aggregates_csv(&mut w)?;
    w.flush()?;

    let failed = report.rows.iter().filter(|r| !r.ok).count();
    println!("{} runs, {} failed", report.rows.len(), failed);
    for a in &report.aggregates {
        println!(
            "{:<8} {:<12} {:<7} {:<8} ok {}/{}  mean |err| G1 {:.4} K1 {:.4} G2 {:.4} K2 {:.4}",
            a.test.name(),
            a.method.name(),
            a.perturbation.name(),
            a.level,
            a.succeeded,
            a.requested,
            a.mean_abs_err[0],
            a.mean_abs_err[1],
            a.mean_abs_err[2],
            a.mean_abs_err[3]
        );
    }
    finish(manifest, &args.out, &[rp, ap], start)
}

pub(crate) fn finish_post(
    manifest: RunManifest,
    out: &Path,
    files: &[PathBuf],
    start: Instant,
) -> Result<RunManifest, CliError> {
    finish(manifest, out, files, start)
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    create(path)
}

pub(crate) fn make_dir(out: &Path) -> Result<(), CliError> {
    make_out(out)
}
