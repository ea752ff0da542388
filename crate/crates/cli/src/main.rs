use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_tucker::sim::output::{write_outputs, OutputFormat, RunMetadata};
use irs_tucker::sim::presets::{preset_plan, Preset, PresetPlan};
use irs_tucker::sim::run_experiment;
use irs_tucker::{ExperimentSpec, SweepVariable, SystemConfig};
use serde::Deserialize;

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "irs-tucker", version, about = "Monte-Carlo channel-estimation sweeps for IRS-assisted MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a preset or a custom experiment file and write CSV/JSON results.
    Run(RunArgs),
    /// Check every sweep point against the identifiability conditions.
    Validate(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// fig2..fig6 or custom.
    #[arg(long)]
    preset: Option<String>,
    /// TOML file: overrides for a preset, or the experiments of a custom run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Fixed training SNR; not allowed with SNR sweeps.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or both.
    #[arg(long)]
    format: Option<String>,
}

/// Partial [`SystemConfig`]; present fields replace the preset base.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemOverrides {
    #[serde(alias = "M")]
    bs_antennas: Option<usize>,
    #[serde(alias = "Q")]
    ue_antennas: Option<usize>,
    #[serde(alias = "N")]
    irs_elements: Option<usize>,
    #[serde(alias = "N_h")]
    irs_rows: Option<usize>,
    #[serde(alias = "N_v")]
    irs_cols: Option<usize>,
    #[serde(alias = "T")]
    slots: Option<usize>,
    #[serde(alias = "L1")]
    bs_paths: Option<usize>,
    #[serde(alias = "L2")]
    ue_paths: Option<usize>,
    #[serde(alias = "K_G_db")]
    rician_g_db: Option<f64>,
    #[serde(alias = "K_H_db")]
    rician_h_db: Option<f64>,
}

impl SystemOverrides {
    fn apply(&self, cfg: &mut SystemConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(bs_antennas, ue_antennas, irs_elements, slots, bs_paths, ue_paths, rician_g_db, rician_h_db);
        if self.irs_rows.is_some() {
            cfg.irs_rows = self.irs_rows;
        }
        if self.irs_cols.is_some() {
            cfg.irs_cols = self.irs_cols;
        }
    }
}

/// Config file layout. Flags take precedence over every field.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<String>,
    out: Option<PathBuf>,
    format: Option<String>,
    trials: Option<usize>,
    snr_db: Option<f64>,
    seed: Option<u64>,
    epsilon: Option<f64>,
    max_iter: Option<usize>,
    #[serde(default)]
    system: SystemOverrides,
    /// Full experiment specs; required by the custom preset.
    #[serde(default, rename = "experiment")]
    experiments: Vec<ExperimentSpec>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn exit(&self) -> ExitCode {
        let (label, code) = match self {
            Failure::Usage(m) => (m, EXIT_USAGE),
            Failure::Config(m) => (m, EXIT_CONFIG),
            Failure::Runtime(m) => (m, 1),
        };
        eprintln!("error: {label}");
        ExitCode::from(code)
    }
}

impl From<irs_tucker::Error> for Failure {
    fn from(e: irs_tucker::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Resolved experiments after merging preset, file and flags.
fn resolve(args: &CommonArgs, file: &ConfigFile) -> Result<PresetPlan, Failure> {
    let name = args
        .preset
        .as_deref()
        .or(file.preset.as_deref())
        .ok_or_else(|| Failure::Usage("--preset is required (fig2..fig6 or custom)".into()))?;
    let preset: Preset = name.parse().map_err(|e: irs_tucker::Error| Failure::Usage(e.to_string()))?;
    let mut plan = if preset == Preset::Custom {
        if file.experiments.is_empty() {
            return Err(Failure::Usage(
                "--preset custom needs --config with at least one [[experiment]] table".into(),
            ));
        }
        PresetPlan {
            preset,
            experiments: file.experiments.clone(),
            notes: Vec::new(),
        }
    } else {
        if !file.experiments.is_empty() {
            return Err(Failure::Usage(format!(
                "[[experiment]] tables are only accepted with --preset custom, not {preset}"
            )));
        }
        preset_plan(preset)?
    };

    let trials = args.trials.or(file.trials);
    let snr_db = args.snr_db.or(file.snr_db);
    let seed = args.seed.or(file.seed);
    let epsilon = args.epsilon.or(file.epsilon);
    let max_iter = args.max_iter.or(file.max_iter);
    for e in &mut plan.experiments {
        file.system.apply(&mut e.base);
        if let Some(snr) = snr_db {
            if e.sweep_variable == SweepVariable::SnrDb {
                return Err(Failure::Usage(format!(
                    "--snr-db conflicts with the SNR sweep of experiment {}",
                    e.name
                )));
            }
            e.base.snr_db = snr;
        }
        if let Some(s) = seed {
            e.base.seed = s;
        }
        if let Some(t) = trials {
            if e.sweep_variable != SweepVariable::ComplexityN {
                e.trials = t;
            }
        }
        if let Some(eps) = epsilon {
            e.epsilon = eps;
        }
        if let Some(k) = max_iter {
            e.max_iter = k;
        }
    }
    Ok(plan)
}

/// Every violation at every sweep point; empty when the plan is runnable.
fn violations(plan: &PresetPlan) -> Result<Vec<String>, Failure> {
    let mut found = Vec::new();
    for e in &plan.experiments {
        e.validate()?;
        for v in &e.sweep_values {
            let cfg = e.point_config(v)?;
            for violation in cfg.violations() {
                found.push(format!("{} at {}={v}: {violation}", e.name, e.sweep_variable.name()));
            }
        }
    }
    Ok(found)
}

fn validate(args: &CommonArgs) -> Result<(), Failure> {
    let file = load_config(args.config.as_deref())?;
    let plan = resolve(args, &file)?;
    let found = violations(&plan)?;
    if found.is_empty() {
        let points: usize = plan.experiments.iter().map(|e| e.sweep_values.len()).sum();
        println!("ok: {} experiment(s), {points} sweep point(s)", plan.experiments.len());
        return Ok(());
    }
    for line in &found {
        println!("{line}");
    }
    Err(Failure::Config(format!("{} identifiability violation(s)", found.len())))
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let file = load_config(args.common.config.as_deref())?;
    let plan = resolve(&args.common, &file)?;
    let format: OutputFormat = args
        .format
        .as_deref()
        .or(file.format.as_deref())
        .unwrap_or("csv")
        .parse()
        .map_err(|e: irs_tucker::Error| Failure::Usage(e.to_string()))?;
    let out = args
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));

    let found = violations(&plan)?;
    if !found.is_empty() {
        return Err(Failure::Config(found.join("\n")));
    }
    let mut outcomes = Vec::with_capacity(plan.experiments.len());
    for e in &plan.experiments {
        eprintln!("running {} ({} points, {} trials each)", e.name, e.sweep_values.len(), e.trials);
        outcomes.push(run_experiment(e)?);
    }
    let preset = plan.preset.name();
    let meta = RunMetadata::new(preset, &plan.notes, &outcomes);
    let written = write_outputs(&out, preset, format, &meta, &outcomes)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}
