//! CSV and JSON emission.
//!
//! CSV columns: `experiment,sweep_variable,sweep_value,algorithm,trials,nmse_db,mean_iterations,flops`.
//! `nmse_db` is empty for flop-model rows. The metadata JSON echoes every
//! experiment spec, the seed, the crate version, reading notes, and the mean
//! noise variance at each sweep point.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentOutcome, ExperimentSpec, PointSummary, SweepValue};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "experiment",
    "sweep_variable",
    "sweep_value",
    "algorithm",
    "trials",
    "nmse_db",
    "mean_iterations",
    "flops",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(Error::argument(format!("unknown format {s:?}; expected csv, json or both"))),
        }
    }
}

fn to_json(v: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::argument(format!("json: {e}")))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::argument(format!("{}: {e}", path.display()))
}

fn fmt_db(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.4}"),
        Some(x) if x < 0.0 => "-inf".to_string(),
        Some(_) => "inf".to_string(),
        None => String::new(),
    }
}

/// CSV body for a set of experiments.
pub fn to_csv(outcomes: &[ExperimentOutcome]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::argument(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for o in outcomes {
        for p in &o.points {
            w.write_record([
                o.spec.name.clone(),
                o.spec.sweep_variable.name().to_string(),
                p.sweep_value.to_string(),
                p.algorithm.to_string(),
                p.trials.to_string(),
                fmt_db(p.nmse_db),
                format!("{:.3}", p.mean_iterations),
                p.flops.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::argument(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::argument(format!("csv: {e}")))
}

#[derive(Debug, Serialize)]
struct PointMeta {
    sweep_value: SweepValue,
    noise_variance: f64,
}

#[derive(Debug, Serialize)]
struct ExperimentMeta<'a> {
    spec: &'a ExperimentSpec,
    noise_variance_per_point: Vec<PointMeta>,
}

#[derive(Debug, Serialize)]
pub struct RunMetadata<'a> {
    code_version: &'static str,
    preset: &'a str,
    seed: Option<u64>,
    flop_counts: &'static str,
    notes: &'a [String],
    experiments: Vec<ExperimentMeta<'a>>,
}

impl<'a> RunMetadata<'a> {
    pub fn new(preset: &'a str, notes: &'a [String], outcomes: &'a [ExperimentOutcome]) -> Self {
        let experiments = outcomes
            .iter()
            .map(|o| {
                let mut seen: Vec<PointMeta> = Vec::new();
                for p in &o.points {
                    if !seen.iter().any(|m| m.sweep_value == p.sweep_value) {
                        seen.push(PointMeta {
                            sweep_value: p.sweep_value,
                            noise_variance: p.mean_noise_variance,
                        });
                    }
                }
                ExperimentMeta {
                    spec: &o.spec,
                    noise_variance_per_point: seen,
                }
            })
            .collect();
        Self {
            code_version: env!("CARGO_PKG_VERSION"),
            preset,
            seed: outcomes.first().map(|o| o.spec.base.seed),
            flop_counts: "model-derived",
            notes,
            experiments,
        }
    }
}

#[derive(Debug, Serialize)]
struct JsonResults<'a> {
    metadata: &'a RunMetadata<'a>,
    rows: Vec<JsonRow<'a>>,
}

#[derive(Debug, Serialize)]
struct JsonRow<'a> {
    experiment: &'a str,
    sweep_variable: &'static str,
    #[serde(flatten)]
    point: &'a PointSummary,
}

/// Writes `<stem>.csv` + `<stem>.meta.json` and/or `<stem>.json` into `dir`.
/// Returns the written paths.
pub fn write_outputs(
    dir: &Path,
    stem: &str,
    format: OutputFormat,
    meta: &RunMetadata<'_>,
    outcomes: &[ExperimentOutcome],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = dir.join(format!("{stem}.csv"));
        fs::write(&path, to_csv(outcomes)?).map_err(|e| io_err(&path, e))?;
        written.push(path);
        let path = dir.join(format!("{stem}.meta.json"));
        fs::write(&path, to_json(meta)?).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let rows = outcomes
            .iter()
            .flat_map(|o| {
                o.points.iter().map(move |p| JsonRow {
                    experiment: &o.spec.name,
                    sweep_variable: o.spec.sweep_variable.name(),
                    point: p,
                })
            })
            .collect();
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, to_json(&JsonResults { metadata: meta, rows })?)
            .map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
