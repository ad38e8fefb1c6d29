//! Python bindings for the adaptive-control laboratory: scenario configs,
//! simulation, certificates, sweeps, and artifact generation.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use crm_core::bounds::{oscillation_metrics, BoundCertificate};
use crm_core::experiment;
use crm_core::scenario::{self, ScenarioConfig};
use crm_core::sim::Trajectory;

fn err(e: crm_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One runnable experiment configuration (family, parameters, grid).
#[pyclass(name = "ScenarioConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyScenarioConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenarioConfig {
    /// Parses a TOML config string.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = ScenarioConfig::from_toml_str(text).map_err(err)?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// Parses a JSON config string.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ScenarioConfig::from_json_str(text).map_err(err)?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// Loads a config file (TOML, or JSON for `.json` paths).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::load(std::path::Path::new(path)).map_err(err)?,
        })
    }

    /// Builds one of the shipped presets by name.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        scenario::preset(name)
            .map(|inner| Self { inner })
            .ok_or_else(|| {
                PyValueError::new_err(format!(
                    "unknown preset `{name}` (available: {})",
                    scenario::preset_names().join(", ")
                ))
            })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.as_str().to_string()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.integrator.horizon
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioConfig(name='{}', family='{}')",
            self.inner.name,
            self.inner.family.as_str()
        )
    }
}

/// A recorded simulation: shared time grid plus named channels.
#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    fn channel(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner.channel(name).map(|c| c.to_vec()).map_err(err)
    }

    fn channel_names(&self) -> Vec<String> {
        self.inner
            .channel_names()
            .into_iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    /// Oscillation summary of one channel:
    /// (zero_crossings, derivative_l2, dominant_freq, dominant_amplitude).
    fn oscillation(&self, channel: &str) -> PyResult<(usize, f64, f64, f64)> {
        let m = oscillation_metrics(&self.inner, channel).map_err(err)?;
        Ok((
            m.zero_crossings,
            m.l2_of_derivative,
            m.spectral_peak.0,
            m.spectral_peak.1,
        ))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory({} samples, {} channels)",
            self.inner.len(),
            self.inner.channel_names().len()
        )
    }
}

/// One evaluated bound: `measured <= bound` up to quadrature tolerance.
/// Measurement-only entries carry `bound = margin = None` and pass.
#[pyclass(name = "Certificate", skip_from_py_object)]
#[derive(Clone)]
struct PyCertificate {
    #[pyo3(get)]
    name: String,
    #[pyo3(get)]
    measured: f64,
    #[pyo3(get)]
    passed: bool,
    bound_raw: f64,
    margin_raw: f64,
}

#[pymethods]
impl PyCertificate {
    #[getter]
    fn bound(&self) -> Option<f64> {
        self.bound_raw.is_finite().then_some(self.bound_raw)
    }

    #[getter]
    fn margin(&self) -> Option<f64> {
        self.margin_raw.is_finite().then_some(self.margin_raw)
    }

    fn __repr__(&self) -> String {
        match self.bound() {
            Some(b) => format!(
                "Certificate('{}', measured={:.6e}, bound={:.6e}, passed={})",
                self.name, self.measured, b, self.passed
            ),
            None => format!(
                "Certificate('{}', measured={:.6e}, measurement-only)",
                self.name, self.measured
            ),
        }
    }
}

impl From<&BoundCertificate> for PyCertificate {
    fn from(c: &BoundCertificate) -> Self {
        Self {
            name: c.name.clone(),
            measured: c.measured,
            passed: c.pass,
            bound_raw: c.bound,
            margin_raw: c.margin,
        }
    }
}

/// Names of the shipped presets.
#[pyfunction]
fn preset_names() -> Vec<String> {
    scenario::preset_names()
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Simulates a config and evaluates its certificates in memory.
#[pyfunction]
fn evaluate(config: &PyScenarioConfig) -> PyResult<(PyTrajectory, Vec<PyCertificate>)> {
    let (traj, certs, _) = experiment::execute(&config.inner).map_err(err)?;
    Ok((
        PyTrajectory { inner: traj },
        certs.iter().map(PyCertificate::from).collect(),
    ))
}

/// Simulates a config and returns the trajectory only.
#[pyfunction]
fn simulate(config: &PyScenarioConfig) -> PyResult<PyTrajectory> {
    Ok(evaluate(config)?.0)
}

/// Runs a config and writes CSV/JSON/SVG artifacts into `out_dir`.
/// Returns (all_pass, certificates, artifact_paths).
#[pyfunction]
fn run(config: &PyScenarioConfig, out_dir: &str) -> PyResult<(bool, Vec<PyCertificate>, Vec<String>)> {
    let out = experiment::run_scenario(&config.inner, std::path::Path::new(out_dir)).map_err(err)?;
    let mut paths = vec![
        out.csv_path.display().to_string(),
        out.certificates_path.display().to_string(),
    ];
    paths.extend(out.svg_paths.iter().map(|p| p.display().to_string()));
    Ok((
        out.all_pass,
        out.certificates.iter().map(PyCertificate::from).collect(),
        paths,
    ))
}

/// Sweeps a scalar-family parameter; writes the manifest into `out_dir`.
/// Returns (all_pass, peaking_exponent_or_None, manifest_path).
#[pyfunction]
#[pyo3(signature = (config, axis, values, couple_gamma = false, out_dir = "out"))]
fn sweep(
    config: &PyScenarioConfig,
    axis: &str,
    values: Vec<f64>,
    couple_gamma: bool,
    out_dir: &str,
) -> PyResult<(bool, Option<f64>, String)> {
    let out = experiment::run_sweep(
        &config.inner,
        axis,
        &values,
        couple_gamma,
        std::path::Path::new(out_dir),
    )
    .map_err(err)?;
    Ok((
        out.all_pass,
        out.fit.map(|f| f.exponent),
        out.manifest_path.display().to_string(),
    ))
}

#[pymodule]
fn crmlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenarioConfig>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyCertificate>()?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
