//! Python bindings. Matrices cross the boundary as lists of rows of Python
//! `complex`; experiment specs and outcomes cross as plain dicts.

use irs_tucker::channel::{synthesize_channels, ChannelRealization};
use irs_tucker::estimators::{
    design_pilots, krf_denoise, ls_estimate, simulate_rx, to_tensor, tucker_als, tucker_hosvd,
    AlsOptions, EstimateResult,
};
use irs_tucker::sim::complexity::{ComplexityModel, Dims};
use irs_tucker::sim::presets::{preset_plan, Preset};
use irs_tucker::sim::{self, trial_rng};
use irs_tucker::tensor::{self, CMatrix};
use irs_tucker::{Algorithm, ExperimentSpec, C64};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

create_exception!(irs_tucker, ConfigError, PyValueError, "Scenario cannot be simulated or estimated.");

fn to_py(e: irs_tucker::Error) -> PyErr {
    if e.is_config() {
        ConfigError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

type Rows = Vec<Vec<C64>>;

fn rows_of(m: &CMatrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_of(rows: Rows) -> PyResult<CMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("matrix rows must all have the same length"));
    }
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Scenario parameters. Keyword names follow the Rust field names.
#[pyclass(name = "SystemConfig", module = "irs_tucker", from_py_object)]
#[derive(Clone)]
struct PySystemConfig {
    inner: irs_tucker::SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = Self {
            inner: irs_tucker::SystemConfig::base(),
        };
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                cfg.set(&k.extract::<String>()?, &v)?;
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, name: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let c = &mut self.inner;
        match name {
            "bs_antennas" | "M" => c.bs_antennas = value.extract()?,
            "ue_antennas" | "Q" => c.ue_antennas = value.extract()?,
            "irs_elements" | "N" => c.irs_elements = value.extract()?,
            "irs_rows" | "N_h" => c.irs_rows = value.extract()?,
            "irs_cols" | "N_v" => c.irs_cols = value.extract()?,
            "slots" | "T" => c.slots = value.extract()?,
            "bs_paths" | "L1" => c.bs_paths = value.extract()?,
            "ue_paths" | "L2" => c.ue_paths = value.extract()?,
            "rician_g_db" => c.rician_g_db = value.extract()?,
            "rician_h_db" => c.rician_h_db = value.extract()?,
            "snr_db" => c.snr_db = value.extract()?,
            "seed" => c.seed = value.extract()?,
            _ => return Err(PyValueError::new_err(format!("unknown SystemConfig field {name:?}"))),
        }
        Ok(())
    }

    /// Violated identifiability conditions; empty when the scenario is valid.
    fn violations(&self) -> Vec<String> {
        self.inner.violations().iter().map(ToString::to_string).collect()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))?)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SystemConfig(M={}, Q={}, N={}, T={}, L1={}, L2={}, snr_db={}, seed={})",
            c.bs_antennas, c.ue_antennas, c.irs_elements, c.slots, c.bs_paths, c.ue_paths, c.snr_db, c.seed
        )
    }
}

/// One channel draw with its LS-ready received block.
#[pyclass(name = "Trial", module = "irs_tucker", skip_from_py_object)]
struct PyTrial {
    cfg: irs_tucker::SystemConfig,
    channel: ChannelRealization,
    ls: EstimateResult,
    noise_variance: f64,
    trial: usize,
}

#[pymethods]
impl PyTrial {
    /// True combined channel R, (M*Q) x N.
    #[getter]
    fn r(&self) -> Rows {
        rows_of(&self.channel.r)
    }

    #[getter]
    fn g(&self) -> Rows {
        rows_of(&self.channel.g)
    }

    #[getter]
    fn h(&self) -> Rows {
        rows_of(&self.channel.h)
    }

    #[getter]
    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Runs one estimator on this trial and returns a result dict with
    /// `r_hat`, `nmse`, `iterations`, `converged` and `error_trace`.
    fn estimate<'py>(&self, py: Python<'py>, algorithm: &str) -> PyResult<Bound<'py, PyDict>> {
        let algorithm: Algorithm = algorithm.parse().map_err(to_py)?;
        let (m, q) = (self.cfg.bs_antennas, self.cfg.ue_antennas);
        let est = match algorithm {
            Algorithm::Ls => self.ls.clone(),
            Algorithm::Krf => krf_denoise(&self.ls.r_hat, m, q).map_err(to_py)?,
            Algorithm::Als | Algorithm::Hosvd => {
                let x = to_tensor(&self.ls.r_hat, m, q).map_err(to_py)?;
                let (l1, l2) = (self.cfg.bs_paths, self.cfg.ue_paths);
                if algorithm == Algorithm::Als {
                    let mut rng = trial_rng(self.cfg.seed ^ 0x5eed, self.trial);
                    tucker_als(&x, l1, l2, &AlsOptions::default(), &mut rng).map_err(to_py)?
                } else {
                    tucker_hosvd(&x, l1, l2).map_err(to_py)?
                }
            }
        };
        let out = PyDict::new(py);
        out.set_item("algorithm", algorithm.name())?;
        out.set_item("nmse", sim::nmse(&self.channel.r, &est.r_hat).map_err(to_py)?)?;
        out.set_item("r_hat", rows_of(&est.r_hat))?;
        out.set_item("iterations", est.iterations)?;
        out.set_item("converged", est.converged)?;
        out.set_item("error_trace", est.error_trace)?;
        Ok(out)
    }
}

/// Draws the channel and received pilots for trial `trial` of `cfg`.
#[pyfunction]
#[pyo3(signature = (cfg, trial = 0))]
fn simulate(cfg: &PySystemConfig, trial: usize) -> PyResult<PyTrial> {
    let cfg = cfg.inner.clone();
    cfg.validate().map_err(to_py)?;
    let mut rng = trial_rng(cfg.seed, trial);
    let channel = synthesize_channels(&cfg, &mut rng).map_err(to_py)?;
    let pd = design_pilots(&cfg).map_err(to_py)?;
    let rx = simulate_rx(&channel, &pd, cfg.snr_db, &mut rng).map_err(to_py)?;
    let ls = ls_estimate(&rx.stacked(), &pd, cfg.bs_antennas).map_err(to_py)?;
    Ok(PyTrial {
        cfg,
        channel,
        ls,
        noise_variance: rx.noise_variance,
        trial,
    })
}

#[pyfunction]
fn nmse(r_true: Rows, r_hat: Rows) -> PyResult<f64> {
    sim::nmse(&matrix_of(r_true)?, &matrix_of(r_hat)?).map_err(to_py)
}

#[pyfunction]
fn kron(a: Rows, b: Rows) -> PyResult<Rows> {
    Ok(rows_of(&tensor::kron(&matrix_of(a)?, &matrix_of(b)?)))
}

#[pyfunction]
fn khatri_rao(a: Rows, b: Rows) -> PyResult<Rows> {
    tensor::khatri_rao(&matrix_of(a)?, &matrix_of(b)?)
        .map(|m| rows_of(&m))
        .map_err(to_py)
}

/// Model flop count for one estimator at the dimensions of `cfg`.
#[pyfunction]
#[pyo3(signature = (algorithm, cfg, als_iters = 10))]
fn complexity_flops(algorithm: &str, cfg: &PySystemConfig, als_iters: usize) -> PyResult<u64> {
    let algorithm: Algorithm = algorithm.parse().map_err(to_py)?;
    Ok(ComplexityModel::default().flops(algorithm, &Dims::from(&cfg.inner), als_iters))
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn outcomes_to_py<'py>(py: Python<'py>, outcomes: &[sim::ExperimentOutcome]) -> PyResult<Bound<'py, PyList>> {
    let list = PyList::empty(py);
    for o in outcomes {
        let text = serde_json::to_string(o).map_err(|e| PyValueError::new_err(e.to_string()))?;
        list.append(json_to_py(py, &text)?)?;
    }
    Ok(list)
}

/// Runs one experiment given as a dict with the `ExperimentSpec` fields.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, spec: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (spec,))?.extract()?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let outcome = py.detach(|| sim::run_experiment(&spec)).map_err(to_py)?;
    Ok(outcomes_to_py(py, &[outcome])?.get_item(0)?)
}

/// Runs every experiment of a figure preset; returns one outcome dict each.
#[pyfunction]
#[pyo3(signature = (name, trials = None, seed = None))]
fn run_preset<'py>(
    py: Python<'py>,
    name: &str,
    trials: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyList>> {
    let preset: Preset = name.parse().map_err(to_py)?;
    let mut plan = preset_plan(preset).map_err(to_py)?;
    for e in &mut plan.experiments {
        if let Some(t) = trials.filter(|_| e.trials > 0) {
            e.trials = t;
        }
        if let Some(s) = seed {
            e.base.seed = s;
        }
    }
    let outcomes = py
        .detach(|| plan.experiments.iter().map(sim::run_experiment).collect::<irs_tucker::Result<Vec<_>>>())
        .map_err(to_py)?;
    outcomes_to_py(py, &outcomes)
}

#[pymodule]
#[pyo3(name = "irs_tucker")]
fn irs_tucker_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_class::<PyTrial>()?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(nmse, m)?)?;
    m.add_function(wrap_pyfunction!(kron, m)?)?;
    m.add_function(wrap_pyfunction!(khatri_rao, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_flops, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    Ok(())
}
