//! Python bindings for `hopsim-core`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use hopsim_core::experiment::{self, default_beta_grid, with_workers, AverageMode};
use hopsim_core::{
    Error, HopInterference, InterfererSnapshot, OutageParams, StreamRng, SystemConfig,
};

create_exception!(hopsim, HopsimError, PyException);
create_exception!(hopsim, ConfigError, HopsimError);
create_exception!(hopsim, PackingFailure, HopsimError);
create_exception!(hopsim, NumericalInstability, HopsimError);

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err.root() {
        Error::Config { .. } => ConfigError::new_err(msg),
        Error::PackingFailure { .. } => PackingFailure::new_err(msg),
        Error::NumericalInstability(_) => NumericalInstability::new_err(msg),
        _ => HopsimError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for hopsim_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Simulation settings; defaults are the canonical table values.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SystemConfig,
}

#[pymethods]
impl PyConfig {
    /// Build from optional `key = value` text and `key=value` overrides.
    #[new]
    #[pyo3(signature = (text = "", overrides = Vec::new()))]
    fn new(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: SystemConfig::from_kv_str(text, &overrides).py_err()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn load(path: std::path::PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: hopsim_core::parse_config(&path, &overrides).py_err()?,
        })
    }

    /// Set one key; the whole configuration is re-validated.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.set(key, value).py_err()?;
        next.validate().py_err()?;
        self.inner = next;
        Ok(())
    }

    /// Current value of `key` as written in a configuration file.
    fn get(&self, key: &str) -> PyResult<String> {
        self.inner
            .to_kv_string()
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim().to_string())
            .ok_or_else(|| ConfigError::new_err(format!("unknown key `{key}`")))
    }

    fn to_kv(&self) -> String {
        self.inner.to_kv_string()
    }

    #[getter]
    fn snr(&self) -> f64 {
        self.inner.snr()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(master_seed={}, n_trials={})",
            self.inner.master_seed, self.inner.n_trials
        )
    }
}

fn snapshot(hops: Vec<(Vec<f64>, Vec<f64>)>) -> PyResult<InterfererSnapshot> {
    InterfererSnapshot::new(
        hops.into_iter()
            .map(|(los, nlos)| HopInterference { los, nlos })
            .collect(),
    )
    .py_err()
}

fn params(config: &PyConfig, beta: f64, hops: usize) -> PyResult<OutageParams> {
    OutageParams::new(beta, hops as u32, &config.inner.channel()).py_err()
}

/// Path gain at distance `d` under the configured law.
#[pyfunction]
fn path_loss(d: f64, config: &PyConfig) -> PyResult<f64> {
    hopsim_core::path_loss(d, &config.inner.channel()).py_err()
}

/// Alzer lower bound on the unit-mean gamma CDF of order `m`.
#[pyfunction]
fn alzer_cdf(z: f64, m: u32) -> f64 {
    hopsim_core::alzer_cdf(z, m)
}

/// Closed-form outage for per-hop lists `(los_powers, nlos_powers)`.
#[pyfunction]
fn conditional_outage(
    hops: Vec<(Vec<f64>, Vec<f64>)>,
    beta: f64,
    config: &PyConfig,
) -> PyResult<f64> {
    let n = hops.len();
    let s = snapshot(hops)?;
    Ok(
        hopsim_core::conditional_outage(&s, &params(config, beta, n)?)
            .py_err()?
            .value,
    )
}

/// Fading Monte Carlo for the same snapshot; returns `(value, stderr)`.
#[pyfunction]
#[pyo3(signature = (hops, beta, config, draws = 100_000, seed = 1))]
fn outage_oracle(
    py: Python<'_>,
    hops: Vec<(Vec<f64>, Vec<f64>)>,
    beta: f64,
    config: &PyConfig,
    draws: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let n = hops.len();
    let s = snapshot(hops)?;
    let p = params(config, beta, n)?;
    let r = py.detach(|| {
        let mut rng: StreamRng = hopsim_core::stream(seed, 0, hopsim_core::Purpose::Fading);
        hopsim_core::outage_oracle(&s, &p, draws, &mut rng)
    });
    let r = r.py_err()?;
    Ok((r.value, r.stderr.unwrap_or(0.0)))
}

/// Conditional outage of one seeded trial.
#[pyfunction]
fn run_trial(config: &PyConfig, trial_index: u64, beta: f64) -> PyResult<f64> {
    Ok(experiment::run_trial(&config.inner, trial_index, beta)
        .py_err()?
        .value)
}

/// Base-station positions `(x, y)` of one seeded trial.
#[pyfunction]
#[pyo3(signature = (config, trial_index = 0))]
fn sample_topology(config: &PyConfig, trial_index: u64) -> PyResult<Vec<(f64, f64)>> {
    let (topology, _) = experiment::trial_snapshot(&config.inner, trial_index).py_err()?;
    Ok(topology
        .bs_positions()
        .iter()
        .map(|p| (p.re, p.im))
        .collect())
}

fn mode(name: &str) -> PyResult<AverageMode> {
    name.parse().py_err()
}

/// Rows `(beta, ccdf, stderr)`.
#[pyfunction]
#[pyo3(signature = (config, betas = None, epsilon_hat = None, workers = 0))]
fn ccdf(
    py: Python<'_>,
    config: &PyConfig,
    betas: Option<Vec<f64>>,
    epsilon_hat: Option<f64>,
    workers: usize,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let cfg = &config.inner;
    let betas = betas.unwrap_or_else(default_beta_grid);
    let eps = epsilon_hat.unwrap_or(cfg.epsilon_hat);
    let table = py
        .detach(|| {
            with_workers(workers, || {
                experiment::ccdf_conditional_outage(cfg, &betas, eps)
            })
        })
        .py_err()?
        .py_err()?;
    Ok(table.rows.iter().map(|r| (r.x, r.y, r.stderr)).collect())
}

/// Location-averaged outage `(value, stderr)`.
#[pyfunction]
#[pyo3(signature = (config, beta, mode = "full_mc", workers = 0))]
fn spatially_averaged_outage(
    py: Python<'_>,
    config: &PyConfig,
    beta: f64,
    mode: &str,
    workers: usize,
) -> PyResult<(f64, f64)> {
    let m = self::mode(mode)?;
    let cfg = &config.inner;
    let r = py
        .detach(|| {
            with_workers(workers, || {
                experiment::spatially_averaged_outage(cfg, beta, m)
            })
        })
        .py_err()?
        .py_err()?;
    Ok((r.value, r.stderr.unwrap_or(0.0)))
}

/// Rows `(lambda_bs, beta, ase, stderr)`.
#[pyfunction]
#[pyo3(signature = (config, lambda_bs, betas, mode = "full_mc", workers = 0))]
fn ase_sweep(
    py: Python<'_>,
    config: &PyConfig,
    lambda_bs: Vec<f64>,
    betas: Vec<f64>,
    mode: &str,
    workers: usize,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let m = self::mode(mode)?;
    let cfg = &config.inner;
    let curves = py
        .detach(|| {
            with_workers(workers, || {
                experiment::ase_sweep(cfg, &lambda_bs, &betas, m)
            })
        })
        .py_err()?
        .py_err()?;
    let mut rows = Vec::new();
    for c in &curves {
        let beta = c.fixed.as_ref().map_or(f64::NAN, |f| f.1);
        rows.extend(c.rows.iter().map(|r| (r.x, beta, r.y, r.stderr)));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(rows)
}

#[pyfunction]
fn rate_from_threshold(beta: f64) -> f64 {
    experiment::rate_from_threshold(beta)
}

#[pymodule]
pub fn hopsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add("HopsimError", m.py().get_type::<HopsimError>())?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("PackingFailure", m.py().get_type::<PackingFailure>())?;
    m.add(
        "NumericalInstability",
        m.py().get_type::<NumericalInstability>(),
    )?;
    m.add_function(wrap_pyfunction!(path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(alzer_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_outage, m)?)?;
    m.add_function(wrap_pyfunction!(outage_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(sample_topology, m)?)?;
    m.add_function(wrap_pyfunction!(ccdf, m)?)?;
    m.add_function(wrap_pyfunction!(spatially_averaged_outage, m)?)?;
    m.add_function(wrap_pyfunction!(ase_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(rate_from_threshold, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
