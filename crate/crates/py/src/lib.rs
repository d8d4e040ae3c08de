//! Python bindings for the `rotor_mle` assessment library.
//!
//! Reports and verdicts are returned as plain dicts; traces, simulations and
//! the online estimators are exposed as classes.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rotor_mle::sim::{CaseFile, FaultSpec};

fn to_py(e: rotor_mle::Error) -> PyErr {
    match e {
        rotor_mle::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_pattern(name: &str) -> PyResult<rotor_mle::SwingPattern> {
    rotor_mle::SwingPattern::ALL
        .into_iter()
        .find(|p| p.to_string() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown swing pattern {name:?}")))
}

fn assess_config(sigma: f64, t_max: f64) -> rotor_mle::AssessConfig {
    let mut config = rotor_mle::AssessConfig::default().with_t_max(t_max);
    config.sdgp.sigma = sigma;
    config
}

/// Rotor angle (rad) and speed deviation (rad/s) of one generator.
#[pyclass(name = "Trace", module = "rotor_mle", from_py_object)]
#[derive(Clone)]
pub struct PyTrace {
    inner: rotor_mle::GeneratorTrace,
}

#[pymethods]
impl PyTrace {
    #[new]
    #[pyo3(signature = (gen_id, times, angles, speeds, dt = None))]
    fn new(gen_id: u32, times: Vec<f64>, angles: Vec<f64>, speeds: Vec<f64>, dt: Option<f64>) -> PyResult<Self> {
        let dt = dt.or_else(|| (times.len() > 1).then(|| times[1] - times[0])).unwrap_or(0.0);
        let inner = rotor_mle::GeneratorTrace { gen_id, dt, times, angles, speeds };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn gen_id(&self) -> u32 {
        self.inner.gen_id
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn angles(&self) -> Vec<f64> {
        self.inner.angles.clone()
    }

    #[getter]
    fn speeds(&self) -> Vec<f64> {
        self.inner.speeds.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Trace(gen_id={}, samples={})", self.inner.gen_id, self.inner.len())
    }
}

/// Output of one simulated fault.
#[pyclass(name = "Simulation", module = "rotor_mle")]
pub struct PySimulation {
    inner: rotor_mle::SimulationOutput,
}

#[pymethods]
impl PySimulation {
    #[getter]
    fn traces(&self) -> Vec<PyTrace> {
        self.inner.traces.iter().cloned().map(|inner| PyTrace { inner }).collect()
    }

    #[getter]
    fn fault_time(&self) -> f64 {
        self.inner.fault.fault_time
    }

    #[getter]
    fn clear_time(&self) -> f64 {
        self.inner.fault.clear_time
    }

    #[getter]
    fn diverged(&self) -> bool {
        self.inner.diverged
    }

    /// Ground-truth verdict, "STABLE" or "UNSTABLE".
    #[pyo3(signature = (window = 10.0))]
    fn oracle(&self, window: f64) -> PyResult<&'static str> {
        Ok(match rotor_mle::stability_oracle(&self.inner, window).map_err(to_py)? {
            rotor_mle::OracleVerdict::Stable => "STABLE",
            rotor_mle::OracleVerdict::Unstable => "UNSTABLE",
        })
    }

    #[pyo3(signature = (sigma = 0.7, t_max = 10.0))]
    fn assess<'py>(&self, py: Python<'py>, sigma: f64, t_max: f64) -> PyResult<Bound<'py, PyAny>> {
        let report = rotor_mle::assess_simulation(&self.inner, &assess_config(sigma, t_max)).map_err(to_py)?;
        json_to_py(py, &report)
    }

    fn to_csv(&self) -> String {
        rotor_mle::write_traces(&self.inner.traces)
    }
}

/// Network model plus optional default fault, read from TOML.
#[pyclass(name = "Case", module = "rotor_mle")]
pub struct PyCase {
    inner: CaseFile,
}

#[pymethods]
impl PyCase {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: CaseFile::load(std::path::Path::new(path)).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: CaseFile::from_toml(text).map_err(to_py)? })
    }

    #[getter]
    fn generator_ids(&self) -> Vec<u32> {
        self.inner.network.generators.iter().map(|g| g.id).collect()
    }

    /// Simulates the file's fault with optional overrides. Opened branches
    /// are kept only when the faulted bus is unchanged.
    #[pyo3(signature = (fault_bus = None, fault_time = None, clear_time = None, remove_branches = None, horizon = None, rate = 120.0))]
    fn simulate(
        &self,
        fault_bus: Option<u32>,
        fault_time: Option<f64>,
        clear_time: Option<f64>,
        remove_branches: Option<Vec<u32>>,
        horizon: Option<f64>,
        rate: f64,
    ) -> PyResult<PySimulation> {
        let base = self.inner.fault.as_ref();
        let missing = |what: &str| PyValueError::new_err(format!("no {what}: pass it or add a [fault] section"));
        let bus = fault_bus.or(base.map(|f| f.bus)).ok_or_else(|| missing("fault bus"))?;
        let fault_time = fault_time.or(base.map(|f| f.fault_time)).ok_or_else(|| missing("fault time"))?;
        let clear_time = clear_time.or(base.map(|f| f.clear_time)).ok_or_else(|| missing("clearing time"))?;
        let same_bus = base.filter(|f| f.bus == bus);
        let fault = FaultSpec {
            bus,
            fault_time,
            clear_time,
            remove_branches: remove_branches
                .unwrap_or_else(|| same_bus.map(|f| f.remove_branches.clone()).unwrap_or_default()),
            label: same_bus.and_then(|f| f.label.clone()),
        };
        let opts = rotor_mle::SimOptions {
            dt: 1.0 / rate,
            horizon: horizon.unwrap_or(clear_time + 10.5),
            ..Default::default()
        };
        let inner = rotor_mle::simulate(&self.inner.network, &fault, &opts).map_err(to_py)?;
        Ok(PySimulation { inner })
    }
}

/// Recursive least-squares line fit of log distance against time.
#[pyclass(name = "RlsState", module = "rotor_mle")]
pub struct PyRlsState {
    inner: rotor_mle::RlsState,
}

#[pymethods]
impl PyRlsState {
    #[new]
    fn new(l0: f64, l1: f64, t0: f64, t1: f64) -> PyResult<Self> {
        Ok(Self { inner: rotor_mle::rls_init(l0, l1, t0, t1).map_err(to_py)? })
    }

    fn update(&mut self, l: f64, t: f64) -> PyResult<f64> {
        self.inner = rotor_mle::rls_update(&self.inner, l, t).map_err(to_py)?;
        Ok(self.inner.lambda_hat)
    }

    #[getter]
    fn lambda_hat(&self) -> f64 {
        self.inner.lambda_hat
    }

    #[getter]
    fn c_hat(&self) -> f64 {
        self.inner.c_hat
    }

    #[getter]
    fn p(&self) -> [[f64; 2]; 2] {
        self.inner.p
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }
}

/// Online swing-pattern classifier fed with relative speed samples.
#[pyclass(name = "SwingClassifier", module = "rotor_mle")]
pub struct PySwingClassifier {
    inner: rotor_mle::SwingClassifier,
}

#[pymethods]
impl PySwingClassifier {
    #[new]
    #[pyo3(signature = (dt = 1.0 / 120.0, t_max = 10.0))]
    fn new(dt: f64, t_max: f64) -> Self {
        let cfg = rotor_mle::ClassifierConfig { t_max, ..Default::default() };
        Self { inner: rotor_mle::SwingClassifier::new(cfg, dt) }
    }

    /// Returns `(pattern, w, decided_at)` once, when the pattern is known.
    fn push(&mut self, v: f64) -> PyResult<Option<(String, usize, usize)>> {
        let out = self.inner.push(v).map_err(to_py)?;
        Ok(out.map(|c| (c.pattern.to_string(), c.w, c.decided_at)))
    }
}

/// Online stability criteria for one generator pair.
#[pyclass(name = "PairAssessor", module = "rotor_mle")]
pub struct PyPairAssessor {
    inner: rotor_mle::PairAssessor,
}

#[pymethods]
impl PyPairAssessor {
    #[new]
    #[pyo3(signature = (severe = 1, least = 2, t_max = 10.0))]
    fn new(severe: u32, least: u32, t_max: f64) -> Self {
        let cfg = rotor_mle::CriteriaConfig { t_max, ..Default::default() };
        Self { inner: rotor_mle::PairAssessor::new(rotor_mle::GenPair { severe, least }, cfg) }
    }

    /// Feeds one MLE estimate at time `t` (s after clearing); returns the verdict.
    fn push<'py>(&mut self, py: Python<'py>, lam: f64, t: f64) -> PyResult<Bound<'py, PyAny>> {
        let v = self.inner.push(lam, t);
        json_to_py(py, &v)
    }
}

/// Parses the trace CSV format.
#[pyfunction]
#[pyo3(signature = (text, nominal_speed = None))]
fn parse_traces(text: &str, nominal_speed: Option<f64>) -> PyResult<Vec<PyTrace>> {
    let traces = rotor_mle::parse_traces(text, &rotor_mle::ParseOptions { nominal_speed }).map_err(to_py)?;
    Ok(traces.into_iter().map(|inner| PyTrace { inner }).collect())
}

/// Renders traces in the CSV format.
#[pyfunction]
fn write_traces(traces: Vec<PyTrace>) -> String {
    let inner: Vec<_> = traces.into_iter().map(|t| t.inner).collect();
    rotor_mle::write_traces(&inner)
}

/// Resamples traces onto the common grid starting at the clearing instant.
/// Returns a dict with `gen_ids`, `t0`, `dt`, `angles` and `speeds`.
#[pyfunction]
#[pyo3(signature = (traces, fault_time, clear_time, rate = 120))]
fn align<'py>(
    py: Python<'py>,
    traces: Vec<PyTrace>,
    fault_time: f64,
    clear_time: f64,
    rate: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let inner: Vec<_> = traces.into_iter().map(|t| t.inner).collect();
    let meta = rotor_mle::EventMeta { fault_time, clear_time, label: None };
    let data = rotor_mle::ingest::align_at_rate(&inner, &meta, rate).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("gen_ids", data.gen_ids.clone())?;
    out.set_item("t0", data.time(0))?;
    out.set_item("dt", data.dt())?;
    out.set_item("angles", data.angles)?;
    out.set_item("speeds", data.speeds)?;
    Ok(out)
}

/// Severely disturbed generator pairs from clearing-instant speeds.
/// Returns `([(severe, least), ...], least_ratio)`.
#[pyfunction]
#[pyo3(signature = (speeds, sigma = 0.7))]
fn identify_sdgp(speeds: Vec<(u32, f64)>, sigma: f64) -> PyResult<(Vec<(u32, u32)>, f64)> {
    let sel = rotor_mle::identify_sdgp(&speeds, &rotor_mle::SdgpConfig { sigma }).map_err(to_py)?;
    Ok((sel.pairs.iter().map(|p| (p.severe, p.least)).collect(), sel.least_ratio))
}

/// Swing pattern of a relative speed series: `(pattern, w, decided_at)`.
#[pyfunction]
#[pyo3(signature = (rel_speed, dt = 1.0 / 120.0, t_max = 10.0))]
fn classify(rel_speed: Vec<f64>, dt: f64, t_max: f64) -> PyResult<(String, usize, usize)> {
    let cfg = rotor_mle::ClassifierConfig { t_max, ..Default::default() };
    let c = rotor_mle::classify::classify_series(&rel_speed, &cfg, dt).map_err(to_py)?;
    Ok((c.pattern.to_string(), c.w, c.decided_at))
}

/// MLE series of a relative angle series for given Theiler window and start
/// step: `(times, lambdas)`.
#[pyfunction]
#[pyo3(signature = (rel_angle, w, m_n, pattern, dt = 1.0 / 120.0))]
fn estimate(rel_angle: Vec<f64>, w: usize, m_n: usize, pattern: &str, dt: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let params = rotor_mle::EstimatorParams::new(w, m_n, dt, parse_pattern(pattern)?, 0).map_err(to_py)?;
    let trace = rotor_mle::SdgpTrace {
        pair: rotor_mle::GenPair { severe: 1, least: 2 },
        sign_flipped: false,
        rel_speed: vec![0.0; rel_angle.len()],
        rel_angle,
        v0: 0.0,
        dt,
    };
    let mle = rotor_mle::estimate_stream(&trace, &params).map_err(to_py)?;
    Ok((mle.times, mle.lambdas))
}

/// Full assessment of traces around a fault; returns the report dict.
#[pyfunction]
#[pyo3(signature = (traces, fault_time, clear_time, sigma = 0.7, t_max = 10.0, rate = 120))]
fn assess<'py>(
    py: Python<'py>,
    traces: Vec<PyTrace>,
    fault_time: f64,
    clear_time: f64,
    sigma: f64,
    t_max: f64,
    rate: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let inner: Vec<_> = traces.into_iter().map(|t| t.inner).collect();
    let meta = rotor_mle::EventMeta { fault_time, clear_time, label: None };
    let data = rotor_mle::ingest::align_at_rate(&inner, &meta, rate).map_err(to_py)?;
    let report = rotor_mle::run_assessment(&data, &meta, &assess_config(sigma, t_max)).map_err(to_py)?;
    json_to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "rotor_mle")]
pub fn rotor_mle_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrace>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyCase>()?;
    m.add_class::<PyRlsState>()?;
    m.add_class::<PySwingClassifier>()?;
    m.add_class::<PyPairAssessor>()?;
    m.add_function(wrap_pyfunction!(parse_traces, m)?)?;
    m.add_function(wrap_pyfunction!(write_traces, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(identify_sdgp, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(assess, m)?)?;
    Ok(())
}
