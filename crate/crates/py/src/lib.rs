//! Python bindings: the benchmark environments, the experiment config, and
//! the training/evaluation entry points. Results cross the boundary as JSON
//! strings so Python sees exactly what the result files contain.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lectr_core::harness::{self, ExperimentConfig};
use lectr_core::{DomainId, Env};

fn py_err(e: lectr_core::Error) -> PyErr {
    match e {
        lectr_core::Error::Config(_) | lectr_core::Error::PolicyFile(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// One of the benchmark domains, stepped directly from Python.
#[pyclass(name = "Env")]
struct PyEnv {
    inner: Env,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyEnv {
    /// Build a standard domain: "repeated", "hallway", or "room".
    #[new]
    #[pyo3(signature = (domain, seed = 0))]
    fn new(domain: &str, seed: u64) -> PyResult<Self> {
        let id = DomainId::parse(domain).map_err(py_err)?;
        Ok(PyEnv {
            inner: Env::standard(id),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Restart the episode; returns both agents' observations.
    fn reset(&mut self) -> (usize, usize) {
        let obs = self.inner.reset(&mut self.rng);
        (obs.0[0], obs.0[1])
    }

    /// Advance by one joint action; returns (obs, reward, done).
    fn step(&mut self, action_a: usize, action_b: usize) -> PyResult<((usize, usize), f64, bool)> {
        let out = self.inner.step([action_a, action_b]).map_err(py_err)?;
        Ok(((out.obs.0[0], out.obs.0[1]), out.reward, out.done))
    }

    #[getter]
    fn action_count(&self) -> usize {
        self.inner.action_count()
    }

    #[getter]
    fn obs_space(&self) -> usize {
        self.inner.obs_space()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.done()
    }
}

/// Experiment configuration with the same keys as the TOML config file.
#[pyclass(name = "Config", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Defaults, or a TOML document when given.
    #[new]
    #[pyo3(signature = (toml_text = None))]
    fn new(toml_text: Option<&str>) -> PyResult<Self> {
        let inner = match toml_text {
            Some(text) => toml_parse(text)?,
            None => ExperimentConfig::default(),
        };
        Ok(PyConfig { inner })
    }

    /// Override one key, with the same syntax as the CLI's --set.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.apply_override(key, value).map_err(py_err)
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string_pretty(&self.inner)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(domain='{}', algorithm='{}', seed={})",
            self.inner.domain, self.inner.algorithm, self.inner.seed
        )
    }
}

fn toml_parse(text: &str) -> PyResult<ExperimentConfig> {
    toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Train one run; returns the run result as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, seed = None, policies_path = None))]
fn train(config: &PyConfig, seed: Option<u64>, policies_path: Option<&str>) -> PyResult<String> {
    let cfg = &config.inner;
    let out = harness::train_run(cfg, seed.unwrap_or(cfg.seed)).map_err(py_err)?;
    if let Some(path) = policies_path {
        let file = harness::policy_file_for(cfg, &out).map_err(py_err)?;
        harness::save_policies(path.as_ref(), &file).map_err(py_err)?;
    }
    serde_json::to_string(&out.result).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Mean greedy advice-free return of a saved policy file.
#[pyfunction]
#[pyo3(signature = (policies_path, rollouts = 10))]
fn evaluate(policies_path: &str, rollouts: usize) -> PyResult<f64> {
    harness::evaluate_policies(policies_path.as_ref(), rollouts).map_err(py_err)
}

/// Multi-seed comparison; returns the full report as a JSON string.
#[pyfunction]
fn compare(config: &PyConfig, algorithms: Vec<String>, seeds: Vec<u64>) -> PyResult<String> {
    let (report, rows) = harness::compare(&config.inner, &algorithms, &seeds).map_err(py_err)?;
    let bundle = serde_json::json!({ "report": report, "rows": rows });
    serde_json::to_string(&bundle).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Best achievable discounted joint return of a standard domain.
#[pyfunction]
fn domain_optimum(domain: &str, gamma: f64) -> PyResult<f64> {
    let id = DomainId::parse(domain).map_err(py_err)?;
    Ok(harness::domain_optimum(&Env::standard(id), gamma))
}

/// Two-sided Welch t-test p-value.
#[pyfunction]
fn welch_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    harness::welch_t_test(&a, &b).map_err(py_err)
}

#[pymodule]
fn lectr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(domain_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    Ok(())
}
