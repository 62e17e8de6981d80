use super::{HarnessError, Method, PerturbationKind, RunOutcome};
use crate::fem::LoadCase;
use serde::Serialize;
use std::io::{BufRead, Write};

pub const REALIZATION_COLUMNS: [&str; 21] = [
    "test",
    "method",
    "perturbation",
    "level",
    "realization",
    "status",
    "G1",
    "K1",
    "G2",
    "K2",
    "err_G1",
    "err_K1",
    "err_G2",
    "err_K2",
    "bc_error_initial",
    "bc_error_final",
    "cost",
    "acceptance_rate",
    "iterations",
    "converged",
    "message",
];

pub const AGGREGATE_COLUMNS: [&str; 30] = [
    "test",
    "method",
    "perturbation",
    "level",
    "requested",
    "succeeded",
    "failed",
    "mean_G1",
    "std_G1",
    "mean_K1",
    "std_K1",
    "mean_G2",
    "std_G2",
    "mean_K2",
    "std_K2",
    "mean_err_G1",
    "std_err_G1",
    "mean_err_K1",
    "std_err_K1",
    "mean_err_G2",
    "std_err_G2",
    "mean_err_K2",
    "std_err_K2",
    "mean_abs_err_G1",
    "mean_abs_err_K1",
    "mean_abs_err_G2",
    "mean_abs_err_K2",
    "mean_bc_error_initial",
    "mean_bc_error_final",
    "mean_acceptance_rate",
];

/// One campaign run; failed runs carry only the key and the message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationRow {
    pub test: LoadCase,
    pub method: Method,
    pub perturbation: PerturbationKind,
    pub level: f64,
    pub realization: u64,
    pub ok: bool,
    pub moduli: [f64; 4],
    pub errors: [f64; 4],
    pub bc_error_initial: Option<f64>,
    pub bc_error_final: Option<f64>,
    pub cost: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl RealizationRow {
    pub fn from_outcome(o: &RunOutcome, level: f64) -> Self {
        RealizationRow {
            test: o.spec.case,
            method: o.spec.method,
            perturbation: o.spec.perturbation.kind,
            level,
            realization: o.spec.realization,
            ok: true,
            moduli: o.moduli,
            errors: o.errors,
            bc_error_initial: o.bc_error_initial,
            bc_error_final: o.bc_error_final,
            cost: o.cost,
            acceptance_rate: o.acceptance_rate,
            iterations: o.iterations,
            converged: o.converged,
            message: String::new(),
        }
    }

    pub fn failed(
        test: LoadCase,
        method: Method,
        perturbation: PerturbationKind,
        level: f64,
        realization: u64,
        message: String,
    ) -> Self {
        RealizationRow {
            test,
            method,
            perturbation,
            level,
            realization,
            ok: false,
            moduli: [f64::NAN; 4],
            errors: [f64::NAN; 4],
            bc_error_initial: None,
            bc_error_final: None,
            cost: None,
            acceptance_rate: None,
            iterations: 0,
            converged: false,
            message,
        }
    }

    fn key(&self) -> (LoadCase, Method, PerturbationKind, u64) {
        (self.test, self.method, self.perturbation, self.level.to_bits())
    }
}

/// Mean and spread over the successful runs of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub test: LoadCase,
    pub method: Method,
    pub perturbation: PerturbationKind,
    pub level: f64,
    pub requested: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub mean: [f64; 4],
    pub std: [f64; 4],
    pub mean_err: [f64; 4],
    pub std_err: [f64; 4],
    pub mean_abs_err: [f64; 4],
    pub mean_bc_error_initial: Option<f64>,
    pub mean_bc_error_final: Option<f64>,
    pub mean_acceptance_rate: Option<f64>,
}

/// Per-run rows and per-grid-point aggregates of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<RealizationRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    (m, s)
}

fn mean_opt(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Groups rows by `(test, method, perturbation, level)` in first-seen order.
/// `requested` is the realization count asked for per grid point.
pub fn aggregate(rows: &[RealizationRow], requested: usize) -> Vec<AggregateRow> {
    let mut keys = Vec::new();
    for r in rows {
        if !keys.contains(&r.key()) {
            keys.push(r.key());
        }
    }
    keys.iter()
        .map(|key| {
            let group: Vec<&RealizationRow> = rows.iter().filter(|r| r.key() == *key).collect();
            let ok: Vec<&&RealizationRow> = group.iter().filter(|r| r.ok).collect();
            let first = group[0];
            let mut agg = AggregateRow {
                test: first.test,
                method: first.method,
                perturbation: first.perturbation,
                level: first.level,
                requested,
                succeeded: ok.len(),
                failed: group.len() - ok.len(),
                mean: [f64::NAN; 4],
                std: [f64::NAN; 4],
                mean_err: [f64::NAN; 4],
                std_err: [f64::NAN; 4],
                mean_abs_err: [f64::NAN; 4],
                mean_bc_error_initial: mean_opt(ok.iter().map(|r| r.bc_error_initial)),
                mean_bc_error_final: mean_opt(ok.iter().map(|r| r.bc_error_final)),
                mean_acceptance_rate: mean_opt(ok.iter().map(|r| r.acceptance_rate)),
            };
            for p in 0..4 {
                let vals: Vec<f64> = ok.iter().map(|r| r.moduli[p]).collect();
                (agg.mean[p], agg.std[p]) = mean_std(&vals);
                let errs: Vec<f64> = ok.iter().map(|r| r.errors[p]).collect();
                (agg.mean_err[p], agg.std_err[p]) = mean_std(&errs);
                let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
                agg.mean_abs_err[p] = mean_std(&abs).0;
            }
            agg
        })
        .collect()
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

impl ExperimentReport {
    pub fn new(rows: Vec<RealizationRow>, requested: usize) -> Self {
        let aggregates = aggregate(&rows, requested);
        ExperimentReport { rows, aggregates }
    }

    pub fn write_realizations_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", REALIZATION_COLUMNS.join(","))?;
        for r in &self.rows {
            let mut f: Vec<String> = vec![
                r.test.name().into(),
                r.method.name().into(),
                r.perturbation.name().into(),
                num(r.level),
                r.realization.to_string(),
                if r.ok { "ok" } else { "failed" }.into(),
            ];
            f.extend(r.moduli.iter().map(|v| num(*v)));
            f.extend(r.errors.iter().map(|v| num(*v)));
            f.push(opt(r.bc_error_initial));
            f.push(opt(r.bc_error_final));
            f.push(opt(r.cost));
            f.push(opt(r.acceptance_rate));
            f.push(r.iterations.to_string());
            f.push(r.converged.to_string());
            f.push(csv_text(&r.message));
            writeln!(w, "{}", f.join(","))?;
        }
        Ok(())
    }

    pub fn write_aggregates_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", AGGREGATE_COLUMNS.join(","))?;
        for a in &self.aggregates {
            let mut f: Vec<String> = vec![
                a.test.name().into(),
                a.method.name().into(),
                a.perturbation.name().into(),
                num(a.level),
                a.requested.to_string(),
                a.succeeded.to_string(),
                a.failed.to_string(),
            ];
            for p in 0..4 {
                f.push(num(a.mean[p]));
                f.push(num(a.std[p]));
            }
            for p in 0..4 {
                f.push(num(a.mean_err[p]));
                f.push(num(a.std_err[p]));
            }
            f.extend(a.mean_abs_err.iter().map(|v| num(*v)));
            f.push(opt(a.mean_bc_error_initial));
            f.push(opt(a.mean_bc_error_final));
            f.push(opt(a.mean_acceptance_rate));
            writeln!(w, "{}", f.join(","))?;
        }
        Ok(())
    }

    /// Parses a file written by [`ExperimentReport::write_realizations_csv`].
    pub fn read_realizations_csv<R: BufRead>(r: R) -> Result<Vec<RealizationRow>, HarnessError> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let err = |message: String| HarnessError::Parse { line: lineno, message };
            if i == 0 {
                if line != REALIZATION_COLUMNS.join(",") {
                    return Err(err("unexpected header".into()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f = split_csv(&line);
            if f.len() != REALIZATION_COLUMNS.len() {
                return Err(err(format!("expected {} fields, got {}", REALIZATION_COLUMNS.len(), f.len())));
            }
            let float = |k: usize| -> Result<f64, HarnessError> {
                if f[k].is_empty() {
                    Ok(f64::NAN)
                } else {
                    f[k].parse().map_err(|_| err(format!("bad number `{}` in column {}", f[k], REALIZATION_COLUMNS[k])))
                }
            };
            let optf = |k: usize| -> Result<Option<f64>, HarnessError> {
                Ok(if f[k].is_empty() { None } else { Some(float(k)?) })
            };
            let perturbation = match f[2].as_str() {
                "none" => PerturbationKind::None,
                "smooth" => PerturbationKind::Smooth,
                "noise" => PerturbationKind::Noise,
                other => return Err(err(format!("unknown perturbation `{other}`"))),
            };
            let mut moduli = [0.0; 4];
            let mut errors = [0.0; 4];
            for p in 0..4 {
                moduli[p] = float(6 + p)?;
                errors[p] = float(10 + p)?;
            }
            rows.push(RealizationRow {
                test: f[0].parse().map_err(err)?,
                method: f[1].parse().map_err(err)?,
                perturbation,
                level: float(3)?,
                realization: f[4].parse().map_err(|_| err("bad realization index".into()))?,
                ok: match f[5].as_str() {
                    "ok" => true,
                    "failed" => false,
                    other => return Err(err(format!("unknown status `{other}`"))),
                },
                moduli,
                errors,
                bc_error_initial: optf(14)?,
                bc_error_final: optf(15)?,
                cost: optf(16)?,
                acceptance_rate: optf(17)?,
                iterations: f[18].parse().map_err(|_| err("bad iteration count".into()))?,
                converged: f[19].parse().map_err(|_| err("bad converged flag".into()))?,
                message: f[20].clone(),
            });
        }
        Ok(rows)
    }
}

fn split_csv(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}
