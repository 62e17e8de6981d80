use super::{Chain, MhaError};
use serde::Serialize;

const GRID_POINTS: usize = 512;
const MIN_KEPT: usize = 100;

/// Gaussian kernel density estimate on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl Kde {
    /// Silverman's rule `0.9 min(std, IQR / 1.34) n^(-1/5)`; the grid spans
    /// the sample range.
    pub fn estimate(samples: &[f64]) -> Kde {
        let n = samples.len();
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[n - 1]);
        let sd = std_dev(samples);
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let bandwidth = 0.9 * spread * (n as f64).powf(-0.2);
        if !(hi > lo) || !(bandwidth > 0.0) {
            return Kde {
                bandwidth: 0.0,
                grid: vec![lo],
                density: vec![1.0],
            };
        }
        let grid: Vec<f64> = (0..GRID_POINTS)
            .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let norm = 1.0 / (n as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let inv2 = 1.0 / (2.0 * bandwidth * bandwidth);
        let cutoff = 8.0 * bandwidth;
        let density = grid
            .iter()
            .map(|&x| {
                let a = sorted.partition_point(|&s| s < x - cutoff);
                let b = sorted.partition_point(|&s| s <= x + cutoff);
                sorted[a..b].iter().map(|s| (-(x - s) * (x - s) * inv2).exp()).sum::<f64>() * norm
            })
            .collect();
        Kde {
            bandwidth,
            grid,
            density,
        }
    }

    /// Grid point of highest density (first one on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (k, d) in self.density.iter().enumerate() {
            if *d > self.density[best] {
                best = k;
            }
        }
        self.grid[best]
    }
}

/// Statistics of the post-burn-in states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub mode: Vec<f64>,
    /// Probability mass of the central credible interval.
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub correlation: Vec<Vec<f64>>,
    #[serde(skip)]
    pub kde: Vec<Kde>,
}

impl PosteriorSummary {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    /// `key: value` report.
    pub fn to_report(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "samples: {}", self.samples);
        let _ = writeln!(s, "acceptance_rate: {:.4}", self.acceptance_rate);
        let _ = writeln!(s, "credible_level: {}", self.level);
        for (k, n) in self.names.iter().enumerate() {
            let _ = writeln!(
                s,
                "{n}: mode={:.6e} mean={:.6e} std={:.6e} lower={:.6e} upper={:.6e}",
                self.mode[k], self.mean[k], self.std[k], self.lower[k], self.upper[k]
            );
        }
        s
    }

    /// `parameter,x,density` rows of every KDE.
    pub fn write_kde_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "parameter,x,density")?;
        for (n, kde) in self.names.iter().zip(&self.kde) {
            for (x, d) in kde.grid.iter().zip(&kde.density) {
                writeln!(w, "{n},{x:e},{d:e}")?;
            }
        }
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + t * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Summary of the states after burn-in with a central credible interval of
/// probability `level`.
pub fn summarize(chain: &Chain, level: f64) -> Result<PosteriorSummary, MhaError> {
    let kept = chain.kept();
    if kept.len() < MIN_KEPT {
        return Err(MhaError::ChainTooShort {
            kept: kept.len(),
            needed: MIN_KEPT,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MhaError::InvalidSettings(format!("credible level {level} outside (0, 1)")));
    }
    let dim = chain.dim();
    let columns: Vec<Vec<f64>> = (0..dim).map(|j| chain.column(j)).collect();
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let stds: Vec<f64> = columns.iter().map(|c| std_dev(c)).collect();
    let kde: Vec<Kde> = columns.iter().map(|c| Kde::estimate(c)).collect();
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for c in &columns {
        let mut s = c.clone();
        s.sort_by(f64::total_cmp);
        lower.push(quantile(&s, 0.5 * (1.0 - level)));
        upper.push(quantile(&s, 0.5 * (1.0 + level)));
    }
    let n = kept.len() as f64;
    let correlation = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    if i == j {
                        return 1.0;
                    }
                    if stds[i] == 0.0 || stds[j] == 0.0 {
                        return 0.0;
                    }
                    let cov = columns[i]
                        .iter()
                        .zip(&columns[j])
                        .map(|(a, b)| (a - means[i]) * (b - means[j]))
                        .sum::<f64>()
                        / (n - 1.0);
                    cov / (stds[i] * stds[j])
                })
                .collect()
        })
        .collect();
    Ok(PosteriorSummary {
        names: chain.names.clone(),
        samples: kept.len(),
        acceptance_rate: chain.acceptance_rate(),
        mode: kde.iter().map(Kde::mode).collect(),
        mean: means,
        std: stds,
        level,
        lower,
        upper,
        correlation,
        kde,
    })
}

/// Rescales each state's material block so that the `pivot` entry equals
/// `pivot_value`; boundary entries are left alone.
pub fn normalize_chain(chain: &Chain, pivot: usize, pivot_value: f64) -> Result<Chain, MhaError> {
    if pivot >= chain.n_mat {
        return Err(MhaError::InvalidSettings(format!("pivot {pivot} is not a material entry")));
    }
    let mut out = chain.clone();
    for (step, s) in out.states.iter_mut().enumerate() {
        let p = s[pivot];
        if !(p > 0.0) {
            return Err(MhaError::PivotNonPositive { step });
        }
        let c = pivot_value / p;
        for v in &mut s[..chain.n_mat] {
            *v *= c;
        }
        s[pivot] = pivot_value;
    }
    Ok(out)
}

/// Material ratios to the `pivot` entry, named `<name>/<pivot name>`.
pub fn ratio_chain(chain: &Chain, pivot: usize) -> Result<Chain, MhaError> {
    let mut out = normalize_chain(chain, pivot, 1.0)?;
    let pname = chain.names[pivot].clone();
    for n in &mut out.names[..chain.n_mat] {
        *n = format!("{n}/{pname}");
    }
    Ok(out)
}
