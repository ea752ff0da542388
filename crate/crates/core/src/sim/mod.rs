//! Monte-Carlo experiment engine.
//!
//! Every trial owns an RNG stream derived from `(experiment seed, trial index)`,
//! so results do not depend on scheduling and the same trial index sees the
//! same random draws at every sweep point.

pub mod complexity;
pub mod output;
pub mod presets;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{synthesize_channels, SystemConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    design_pilots, krf_denoise, ls_estimate, simulate_rx, to_tensor, tucker_als, tucker_hosvd,
    AlsOptions, PilotDesign,
};
use crate::tensor::CMatrix;

use complexity::{ComplexityModel, Dims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Algorithm {
    Ls,
    Krf,
    Als,
    Hosvd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ls, Algorithm::Krf, Algorithm::Als, Algorithm::Hosvd];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ls => "LS",
            Algorithm::Krf => "KRF",
            Algorithm::Als => "ALS",
            Algorithm::Hosvd => "HOSVD",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::argument(format!("unknown algorithm {s:?}; expected LS, KRF, ALS or HOSVD"))
            })
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> Self {
        a.name().to_string()
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Training SNR in dB.
    SnrDb,
    /// Joint Rician factor in dB, applied to both hops.
    RicianDb,
    /// `(L1, L2)` path-count pairs.
    #[serde(rename = "L_pairs")]
    LPairs,
    /// IRS size, Monte Carlo.
    #[serde(rename = "N")]
    N,
    /// IRS size, flop model only.
    ComplexityN,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::RicianDb => "rician_db",
            SweepVariable::LPairs => "L_pairs",
            SweepVariable::N => "N",
            SweepVariable::ComplexityN => "complexity_N",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Scalar(f64),
    Pair([usize; 2]),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Scalar(v) => write!(f, "{v}"),
            SweepValue::Pair([a, b]) => write!(f, "{a}x{b}"),
        }
    }
}

fn default_epsilon() -> f64 {
    AlsOptions::default().epsilon
}

fn default_max_iter() -> usize {
    AlsOptions::default().max_iter
}

fn default_als_iters() -> usize {
    10
}

/// One sweep of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: SystemConfig,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<SweepValue>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    /// ALS stopping threshold.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// When set, every sweep point uses `T = slots_per_element * N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots_per_element: Option<usize>,
    /// Nominal ALS iteration count for flop-model sweeps.
    #[serde(default = "default_als_iters")]
    pub als_iters: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(Error::argument(format!("{}: sweep_values is empty", self.name)));
        }
        if self.algorithms.is_empty() {
            return Err(Error::argument(format!("{}: no algorithms selected", self.name)));
        }
        if self.trials == 0 && self.sweep_variable != SweepVariable::ComplexityN {
            return Err(Error::argument(format!("{}: trials must be at least 1", self.name)));
        }
        if !(self.epsilon >= 0.0) || self.max_iter == 0 {
            return Err(Error::argument(format!(
                "{}: epsilon must be non-negative and max_iter positive",
                self.name
            )));
        }
        for v in &self.sweep_values {
            self.point_config(v)?;
        }
        Ok(())
    }

    pub fn als_options(&self) -> AlsOptions {
        AlsOptions {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
        }
    }

    /// Scenario at one sweep point. Does not check identifiability.
    pub fn point_config(&self, value: &SweepValue) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        let var = self.sweep_variable;
        match (var, value) {
            (SweepVariable::SnrDb, SweepValue::Scalar(v)) => cfg.snr_db = *v,
            (SweepVariable::RicianDb, SweepValue::Scalar(v)) => {
                cfg.rician_g_db = *v;
                cfg.rician_h_db = *v;
            }
            (SweepVariable::LPairs, SweepValue::Pair([l1, l2])) => {
                cfg.bs_paths = *l1;
                cfg.ue_paths = *l2;
            }
            (SweepVariable::N | SweepVariable::ComplexityN, SweepValue::Scalar(v)) => {
                if !(*v >= 1.0 && v.fract() == 0.0) {
                    return Err(Error::argument(format!("N must be a positive integer, got {v}")));
                }
                let n = *v as usize;
                let (rows, cols) = most_square_grid(n);
                cfg.irs_elements = n;
                cfg.irs_rows = Some(rows);
                cfg.irs_cols = Some(cols);
            }
            _ => {
                return Err(Error::argument(format!(
                    "sweep value {value} does not fit sweep variable {}",
                    var.name()
                )))
            }
        }
        if let Some(k) = self.slots_per_element {
            cfg.slots = k * cfg.irs_elements;
        }
        Ok(cfg)
    }
}

/// Factorization `rows * cols = n` with `rows <= cols` as close as possible.
pub fn most_square_grid(n: usize) -> (usize, usize) {
    let rows = (1..=n)
        .take_while(|d| d * d <= n)
        .filter(|d| n % d == 0)
        .last()
        .unwrap_or(1);
    (rows, n / rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial: usize,
    pub sweep_value: SweepValue,
    pub algorithm: Algorithm,
    /// `|R - R_hat|_F^2 / |R|_F^2`.
    pub nmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub flops: u64,
    pub noise_variance: f64,
}

/// Aggregate for one `(sweep value, algorithm)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub sweep_value: SweepValue,
    pub algorithm: Algorithm,
    pub trials: usize,
    /// `10 log10(mean nmse)`; `None` for flop-model sweeps.
    pub nmse_db: Option<f64>,
    pub mean_iterations: f64,
    pub flops: u64,
    pub mean_noise_variance: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
    pub points: Vec<PointSummary>,
}

impl ExperimentOutcome {
    pub fn point(&self, value: &SweepValue, algorithm: Algorithm) -> Option<&PointSummary> {
        self.points
            .iter()
            .find(|p| &p.sweep_value == value && p.algorithm == algorithm)
    }

    /// `(sweep value, nmse_db)` for one algorithm in sweep order.
    pub fn nmse_curve(&self, algorithm: Algorithm) -> Vec<(SweepValue, f64)> {
        self.points
            .iter()
            .filter(|p| p.algorithm == algorithm)
            .filter_map(|p| p.nmse_db.map(|v| (p.sweep_value, v)))
            .collect()
    }
}

/// Per-trial normalized squared error.
pub fn nmse(r_true: &CMatrix, r_hat: &CMatrix) -> Result<f64> {
    if r_true.shape() != r_hat.shape() {
        return Err(Error::argument(format!(
            "shape mismatch: {:?} vs {:?}",
            r_true.shape(),
            r_hat.shape()
        )));
    }
    Ok((r_true - r_hat).norm_squared() / r_true.norm_squared())
}

/// `10 log10` of the mean ratio. The sum runs over sorted values so the
/// result does not depend on trial order.
pub fn mean_nmse_db(ratios: &[f64]) -> f64 {
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    10.0 * (sorted.iter().sum::<f64>() / sorted.len() as f64).log10()
}

/// RNG for one trial of an experiment.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// One channel draw, one noisy block, every requested estimator.
pub fn run_trial(
    cfg: &SystemConfig,
    pd: &PilotDesign,
    algorithms: &[Algorithm],
    opts: &AlsOptions,
    trial: usize,
    sweep_value: SweepValue,
) -> Result<Vec<TrialRecord>> {
    let mut rng = trial_rng(cfg.seed, trial);
    let ch = synthesize_channels(cfg, &mut rng)?;
    let rx = simulate_rx(&ch, pd, cfg.snr_db, &mut rng)?;
    let (m, q) = (cfg.bs_antennas, cfg.ue_antennas);
    let ls = ls_estimate(&rx.stacked(), pd, m)?;
    let ls_tensor = to_tensor(&ls.r_hat, m, q)?;
    let dims = Dims::from(cfg);
    let model = ComplexityModel {
        orthogonal_pilots: pd.orthogonal_gain.is_some(),
    };

    let mut out = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        let est = match algorithm {
            Algorithm::Ls => ls.clone(),
            Algorithm::Krf => krf_denoise(&ls.r_hat, m, q)?,
            Algorithm::Als => tucker_als(&ls_tensor, cfg.bs_paths, cfg.ue_paths, opts, &mut rng)?,
            Algorithm::Hosvd => tucker_hosvd(&ls_tensor, cfg.bs_paths, cfg.ue_paths)?,
        };
        out.push(TrialRecord {
            seed: cfg.seed,
            trial,
            sweep_value,
            algorithm,
            nmse: nmse(&ch.r, &est.r_hat)?,
            iterations: est.iterations,
            converged: est.converged,
            flops: model.flops(algorithm, &dims, est.iterations),
            noise_variance: rx.noise_variance,
        });
    }
    Ok(out)
}

fn complexity_points(spec: &ExperimentSpec) -> Result<Vec<PointSummary>> {
    let model = ComplexityModel::default();
    let mut points = Vec::new();
    for value in &spec.sweep_values {
        let dims = Dims::from(&spec.point_config(value)?);
        for &algorithm in &spec.algorithms {
            let iters = if algorithm == Algorithm::Als { spec.als_iters } else { 0 };
            points.push(PointSummary {
                sweep_value: *value,
                algorithm,
                trials: 0,
                nmse_db: None,
                mean_iterations: iters as f64,
                flops: model.flops(algorithm, &dims, iters),
                mean_noise_variance: 0.0,
                converged_fraction: 1.0,
            });
        }
    }
    Ok(points)
}

fn summarize(value: SweepValue, algorithm: Algorithm, records: &[&TrialRecord]) -> PointSummary {
    let n = records.len() as f64;
    let ratios: Vec<f64> = records.iter().map(|r| r.nmse).collect();
    PointSummary {
        sweep_value: value,
        algorithm,
        trials: records.len(),
        nmse_db: Some(mean_nmse_db(&ratios)),
        mean_iterations: records.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        flops: (records.iter().map(|r| r.flops as f64).sum::<f64>() / n).round() as u64,
        mean_noise_variance: records.iter().map(|r| r.noise_variance).sum::<f64>() / n,
        converged_fraction: records.iter().filter(|r| r.converged).count() as f64 / n,
    }
}

/// Runs every sweep point of `spec`; trials execute in parallel.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    if spec.sweep_variable == SweepVariable::ComplexityN {
        return Ok(ExperimentOutcome {
            spec: spec.clone(),
            records: Vec::new(),
            points: complexity_points(spec)?,
        });
    }
    let opts = spec.als_options();
    let mut records = Vec::new();
    let mut points = Vec::new();
    for value in &spec.sweep_values {
        let at = |e: Error| e.context(format!("{} at {}={value}", spec.name, spec.sweep_variable.name()));
        let cfg = spec.point_config(value).map_err(at)?;
        cfg.validate().map_err(at)?;
        let pd = design_pilots(&cfg).map_err(at)?;
        let per_trial: Vec<Vec<TrialRecord>> = (0..spec.trials)
            .into_par_iter()
            .map(|trial| run_trial(&cfg, &pd, &spec.algorithms, &opts, trial, *value))
            .collect::<Result<_>>()
            .map_err(at)?;
        let flat: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
        for &algorithm in &spec.algorithms {
            let mine: Vec<&TrialRecord> = flat.iter().filter(|r| r.algorithm == algorithm).collect();
            points.push(summarize(*value, algorithm, &mine));
        }
        records.extend(flat);
    }
    Ok(ExperimentOutcome {
        spec: spec.clone(),
        records,
        points,
    })
}

/// Mean ALS iterations at each sweep point.
pub fn convergence_study(spec: &ExperimentSpec) -> Result<Vec<(SweepValue, f64)>> {
    if !spec.algorithms.contains(&Algorithm::Als) {
        return Err(Error::argument(format!(
            "{}: convergence study needs ALS among the algorithms",
            spec.name
        )));
    }
    let mut only_als = spec.clone();
    only_als.algorithms = vec![Algorithm::Als];
    let outcome = run_experiment(&only_als)?;
    Ok(outcome
        .points
        .iter()
        .map(|p| (p.sweep_value, p.mean_iterations))
        .collect())
}
