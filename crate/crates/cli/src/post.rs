use crate::commands::{create_file, finish_post, make_dir, CliError};
use crate::PostArgs;
use microid::fem::{MaterialParams, MODULUS_NAMES};
use microid::harness::{Config, FileDigest, RunManifest};
use microid::mha::{normalize_chain, summarize, Chain, PosteriorSummary};
use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

const PLOT_SCRIPT: &str = r#"# Posterior densities from the KDE grids written next to this script.
# Usage: python plot.py  (needs pandas and matplotlib)
import glob
import pandas as pd
import matplotlib.pyplot as plt

for path in sorted(glob.glob("kde_*.csv")):
    df = pd.read_csv(path)
    group = "pivot" if "pivot" in df.columns else None
    params = list(dict.fromkeys(df["parameter"]))
    fig, axes = plt.subplots(1, len(params), figsize=(3.2 * len(params), 2.8), squeeze=False)
    for ax, name in zip(axes[0], params):
        sub = df[df["parameter"] == name]
        if group:
            for key, part in sub.groupby(group):
                ax.plot(part["x"], part["density"], label=f"{group} {key}")
            ax.legend(fontsize=7)
        else:
            ax.plot(sub["x"], sub["density"])
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path.replace(".csv", ".png"), dpi=150)
"#;

fn read_chain(path: &Path) -> Result<Chain, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })?;
    Chain::read_csv(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn labels(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "chain".into()))
        .collect();
    stems
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if stems.iter().filter(|o| *o == s).count() > 1 {
                format!("{k}_{s}")
            } else {
                s.clone()
            }
        })
        .collect()
}

fn pivot_index(chain: &Chain, name: &str) -> Result<usize, CliError> {
    chain.names[..chain.n_mat]
        .iter()
        .position(|n| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| CliError::Usage(format!("pivot `{name}` is not a sampled modulus (have {:?})", &chain.names[..chain.n_mat])))
}

fn reference_of(config: &Config, name: &str) -> Result<f64, CliError> {
    let i = MaterialParams::index_of(name).ok_or_else(|| CliError::Usage(format!("unknown modulus `{name}`")))?;
    Ok(config.material.params().values[i])
}

pub fn post(args: &PostArgs, config: &Config, recorded: Vec<String>) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let level = args.level.unwrap_or(config.mha.credible_level);
    make_dir(&args.out)?;
    let mut inputs = Vec::new();
    let mut files = Vec::new();
    let mut report = String::new();
    let mut summaries: BTreeMap<String, PosteriorSummary> = BTreeMap::new();
    let mut pivot_rows = Vec::new();
    for (path, label) in args.chains.iter().zip(labels(&args.chains)) {
        inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: microid::harness::sha256_file(path).map_err(|source| CliError::File {
                path: path.clone(),
                source,
            })?,
        });
        let mut chain = read_chain(path)?;
        if let Some(p) = &args.pivot {
            let idx = pivot_index(&chain, p)?;
            let value = match args.pivot_value {
                Some(v) => v,
                None => reference_of(config, p)?,
            };
            chain = normalize_chain(&chain, idx, value)?;
        }
        let summary = summarize(&chain, level)?;
        report.push_str(&format!("[{label}]\n"));
        if let Some(p) = &args.pivot {
            report.push_str(&format!("pivot: {p}\n"));
        }
        report.push_str(&summary.to_report());
        report.push('\n');
        let kp = args.out.join(format!("kde_{label}.csv"));
        let mut w = create_file(&kp)?;
        summary.write_kde_csv(&mut w)?;
        w.flush()?;
        files.push(kp);

        if args.all_pivots {
            let kp = args.out.join(format!("kde_pivots_{label}.csv"));
            let mut w = create_file(&kp)?;
            writeln!(w, "pivot,parameter,x,density")?;
            for name in MODULUS_NAMES {
                let Ok(idx) = pivot_index(&chain, name) else {
                    continue;
                };
                let normalized = normalize_chain(&chain, idx, reference_of(config, name)?)?;
                let s = summarize(&normalized, level)?;
                for j in 0..normalized.n_mat {
                    pivot_rows.push(format!(
                        "{label},{name},{},{},{},{},{},{}",
                        s.names[j], s.mode[j], s.mean[j], s.std[j], s.lower[j], s.upper[j]
                    ));
                    for (x, d) in s.kde[j].grid.iter().zip(&s.kde[j].density) {
                        writeln!(w, "{name},{},{x:e},{d:e}", s.names[j])?;
                    }
                }
            }
            w.flush()?;
            files.push(kp);
        }
        summaries.insert(label, summary);
    }
    let sp = args.out.join("summary.txt");
    std::fs::write(&sp, &report)?;
    files.push(sp);
    let jp = args.out.join("summary.json");
    let mut w = create_file(&jp)?;
    serde_json::to_writer_pretty(&mut w, &summaries)?;
    writeln!(w)?;
    w.flush()?;
    files.push(jp);
    if args.all_pivots {
        let pp = args.out.join("pivots.csv");
        let mut w = create_file(&pp)?;
        writeln!(w, "chain,pivot,parameter,mode,mean,std,lower,upper")?;
        for r in &pivot_rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        files.push(pp);
    }
    let plot = args.out.join("plot.py");
    std::fs::write(&plot, PLOT_SCRIPT)?;
    files.push(plot);
    print!("{report}");

    let mut manifest = RunManifest::new(recorded, config.seed, config.to_toml());
    manifest.inputs = inputs;
    finish_post(manifest, &args.out, &files, start)
}
