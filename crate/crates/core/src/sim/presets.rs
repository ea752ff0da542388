//! Per-figure experiment sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Algorithm, ExperimentSpec, SweepValue, SweepVariable};
use crate::channel::SystemConfig;
use crate::error::{Error, Result};

/// Monte-Carlo trials per sweep point unless overridden.
pub const DEFAULT_TRIALS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Custom,
}

impl Preset {
    pub const FIGURES: [Preset; 5] = [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Preset::Custom]
            .into_iter()
            .chain(Preset::FIGURES)
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::argument(format!("unknown preset {s:?}")))
    }
}

/// Experiments of a preset plus the reading notes recorded in run metadata.
#[derive(Debug, Clone)]
pub struct PresetPlan {
    pub preset: Preset,
    pub experiments: Vec<ExperimentSpec>,
    pub notes: Vec<String>,
}

fn scalars(values: &[f64]) -> Vec<SweepValue> {
    values.iter().copied().map(SweepValue::Scalar).collect()
}

fn spec(
    name: impl Into<String>,
    base: SystemConfig,
    var: SweepVariable,
    values: Vec<SweepValue>,
    algorithms: &[Algorithm],
) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        base,
        sweep_variable: var,
        sweep_values: values,
        trials: DEFAULT_TRIALS,
        algorithms: algorithms.to_vec(),
        epsilon: 1e-5,
        max_iter: 500,
        slots_per_element: None,
        als_iters: 10,
    }
}

/// M = Q = 8, N = 16, T = 128.
fn large_array_config() -> SystemConfig {
    SystemConfig {
        bs_antennas: 8,
        ue_antennas: 8,
        irs_elements: 16,
        slots: 128,
        ..SystemConfig::base()
    }
}

/// Builds the experiments of a figure preset. `Custom` has no built-in plan.
pub fn preset_plan(preset: Preset) -> Result<PresetPlan> {
    let all = &Algorithm::ALL;
    let als = &[Algorithm::Als];
    let iter_snrs = scalars(&[0.0, 10.0, 20.0, 30.0]);
    let (experiments, notes) = match preset {
        Preset::Fig2 => (
            vec![spec(
                "fig2",
                SystemConfig::base(),
                SweepVariable::RicianDb,
                scalars(&[-10.0, 0.0, 10.0, 20.0, 30.0]),
                all,
            )],
            vec!["single Rician factor K applied to both hops (K_G = K_H = K)".to_string()],
        ),
        Preset::Fig3 => (
            vec![spec(
                "fig3",
                SystemConfig::base(),
                SweepVariable::SnrDb,
                scalars(&[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]),
                all,
            )],
            vec![],
        ),
        Preset::Fig4 => (
            [(1, 1), (2, 2), (4, 4)]
                .into_iter()
                .map(|(l1, l2)| {
                    let base = SystemConfig {
                        bs_paths: l1,
                        ue_paths: l2,
                        ..large_array_config()
                    };
                    spec(format!("fig4_L{l1}x{l2}"), base, SweepVariable::SnrDb, iter_snrs.clone(), als)
                })
                .collect(),
            vec!["path pairs (L1, L2) in {(1,1), (2,2), (4,4)}; one SNR sweep per pair".to_string()],
        ),
        Preset::Fig5 => (
            [0.0, 10.0, 20.0, 30.0]
                .into_iter()
                .map(|snr| {
                    let base = SystemConfig {
                        bs_paths: 2,
                        ue_paths: 2,
                        snr_db: snr,
                        ..large_array_config()
                    };
                    let mut s = spec(
                        format!("fig5_snr{snr}"),
                        base,
                        SweepVariable::N,
                        scalars(&[16.0, 32.0, 64.0]),
                        als,
                    );
                    s.slots_per_element = Some(8);
                    s
                })
                .collect(),
            vec![
                "T = 8N at every point; one N sweep per SNR".to_string(),
                "IRS grid is the most square factorization of N (32 -> 4x8)".to_string(),
            ],
        ),
        Preset::Fig6 => {
            let mut s = spec(
                "fig6",
                SystemConfig::base(),
                SweepVariable::ComplexityN,
                scalars(&[16.0, 32.0, 64.0, 128.0]),
                all,
            );
            s.slots_per_element = Some(4);
            s.trials = 0;
            (
                vec![s],
                vec![
                    "model-derived flop counts with unit constants, not measurements".to_string(),
                    "T = Q*N at every point; ALS charged for als_iters iterations".to_string(),
                ],
            )
        }
        Preset::Custom => {
            return Err(Error::argument("the custom preset needs an experiment spec file"))
        }
    };
    Ok(PresetPlan {
        preset,
        experiments,
        notes,
    })
}
