//! Python bindings: spectrum, design, linear simulation and the CLI
//! commands.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use oseen::channel::ChannelFlow;
use oseen::config::{parse_config, RunConfig};
use oseen::controller::Variant;
use oseen::lift::verify_duality;
use oseen::pipeline::{self, Command, Design};
use oseen::sim::{self, ModalSystem};
use oseen::spectral::build_grid;
use oseen::spectrum::{compute_spectrum, Spectrum, SpectrumOptions};
use oseen::Error;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        1 => PyOSError::new_err(e.to_string()),
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn variant(name: &str) -> PyResult<Variant> {
    Variant::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown variant `{name}`")))
}

/// Retained eigenmodes of the linearized channel flow.
#[pyclass(name = "Spectrum", frozen)]
struct PySpectrum {
    inner: Arc<Spectrum>,
}

#[pymethods]
impl PySpectrum {
    #[new]
    #[pyo3(signature = (nu, a, m=64, m_x=3, j=40))]
    fn new(nu: f64, a: f64, m: usize, m_x: u32, j: usize) -> PyResult<Self> {
        let flow = ChannelFlow::new(nu, a, m_x).map_err(to_py)?;
        let grid = build_grid(m).map_err(to_py)?;
        let opts = SpectrumOptions {
            stable_per_wavenumber: j,
            ..SpectrumOptions::default()
        };
        let s = compute_spectrum(&flow, &grid, &opts).map_err(to_py)?;
        Ok(PySpectrum { inner: Arc::new(s) })
    }

    #[getter]
    fn n_unstable(&self) -> usize {
        self.inner.n_unstable
    }

    /// `(m, λ)` for every retained mode, unstable modes first.
    #[getter]
    fn eigenvalues(&self) -> Vec<(i32, Complex64)> {
        self.inner.modes.iter().map(|e| (e.m, e.lambda)).collect()
    }

    #[getter]
    fn unstable_eigenvalues(&self) -> Vec<Complex64> {
        self.inner.unstable_lambdas()
    }

    #[getter]
    fn stable_gap(&self) -> Option<f64> {
        self.inner.stable_gap()
    }

    #[getter]
    fn gram_defect(&self) -> f64 {
        self.inner.biorth.gram_defect
    }

    #[getter]
    fn semisimple(&self) -> bool {
        self.inner.semisimple.passed
    }

    #[getter]
    fn unique_continuation(&self) -> bool {
        self.inner.unique_continuation.passed
    }

    fn __repr__(&self) -> String {
        format!(
            "Spectrum(nu={}, a={}, M={}, modes={}, unstable={})",
            self.inner.flow.nu(),
            self.inner.flow.a(),
            self.inner.grid.m(),
            self.inner.modes.len(),
            self.inner.n_unstable
        )
    }
}

/// Gains, feedback law and lifted boundary fields.
#[pyclass(name = "Design", frozen)]
struct PyDesign {
    spectrum: Arc<Spectrum>,
    inner: Design,
}

#[pymethods]
impl PyDesign {
    #[new]
    #[pyo3(signature = (spectrum, alpha0=1.0, variant="complex"))]
    fn new(spectrum: &PySpectrum, alpha0: f64, variant: &str) -> PyResult<Self> {
        let v = self::variant(variant)?;
        let d = pipeline::build_design(&spectrum.inner, alpha0, v)
            .map_err(to_py)?
            .ok_or_else(|| PyValueError::new_err("no unstable modes: no controller needed"))?;
        Ok(PyDesign {
            spectrum: spectrum.inner.clone(),
            inner: d,
        })
    }

    #[getter]
    fn k_shift(&self) -> f64 {
        self.inner.gains.k_shift
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.gains.eta
    }

    #[getter]
    fn gamma0(&self) -> f64 {
        self.inner.gains.gamma0()
    }

    /// Closed-loop rates `ρ_j` of the unstable modes.
    #[getter]
    fn rates(&self) -> Vec<Complex64> {
        self.inner.gains.rates()
    }

    #[getter]
    fn cond_f(&self) -> f64 {
        self.inner.law.cond_f
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.law.variant.name()
    }

    /// Largest scaled residual of the duality identity.
    fn duality_residual(&self) -> PyResult<f64> {
        let d = &self.inner;
        let r = verify_duality(&self.spectrum, d.law.gains.k_shift, &d.lifts.fields, &d.law.expected_pairing)
            .map_err(to_py)?;
        Ok(r.max_scaled_residual)
    }
}

/// Linear trajectory from a seeded random real initial state.
#[pyclass(name = "Trajectory", frozen, get_all)]
struct PyTrajectory {
    times: Vec<f64>,
    state_norm: Vec<f64>,
    control_norm: Vec<f64>,
    gamma_fit: Option<f64>,
    gamma0: f64,
    closed_loop: bool,
}

impl From<sim::Trajectory> for PyTrajectory {
    fn from(t: sim::Trajectory) -> Self {
        PyTrajectory {
            times: t.times,
            state_norm: t.state_norm,
            control_norm: t.control_norm,
            gamma_fit: t.gamma_fit,
            gamma0: t.gamma0,
            closed_loop: t.closed_loop,
        }
    }
}

#[pymethods]
impl PyTrajectory {
    fn decay_ratio(&self) -> f64 {
        self.state_norm[self.state_norm.len() - 1] / self.state_norm[0]
    }
}

/// Simulate the open loop, or the closed loop when `design` is given.
#[pyfunction]
#[pyo3(signature = (spectrum, t_end, dt, design=None, seed=0, stable_weight=0.3))]
fn simulate(
    spectrum: &PySpectrum,
    t_end: f64,
    dt: f64,
    design: Option<&PyDesign>,
    seed: u64,
    stable_weight: f64,
) -> PyResult<PyTrajectory> {
    let s = &spectrum.inner;
    let init = sim::random_initial(s, seed, stable_weight).map_err(to_py)?;
    let tr = match design {
        None => sim::simulate_open_loop(s, &init, t_end, dt),
        Some(d) => ModalSystem::closed_loop(s, &d.inner.law, &d.inner.lifts)
            .and_then(|sys| sim::simulate_linear(&sys, &init, t_end, dt)),
    }
    .map_err(to_py)?;
    Ok(tr.into())
}

#[pyfunction]
#[pyo3(signature = (times, norms, window=0.5))]
fn fit_decay_rate(times: Vec<f64>, norms: Vec<f64>, window: f64) -> PyResult<f64> {
    if times.len() != norms.len() {
        return Err(PyValueError::new_err("times and norms differ in length"));
    }
    sim::fit_decay_rate(&times, &norms, window).map_err(to_py)
}

/// Closed-loop rate `λ(k+λ)/(k+λ−νη)`.
#[pyfunction]
fn closed_loop_rate(lambda: Complex64, k: f64, eta: f64, nu: f64) -> Complex64 {
    oseen::controller::closed_loop_rate(lambda, k, eta, nu)
}

/// Parse a flat configuration and return the resolved values as JSON.
#[pyfunction]
fn resolve_config(text: &str) -> PyResult<String> {
    let cfg = parse_config(text).map_err(to_py)?;
    serde_json::to_string(&cfg).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Run a CLI command; returns the exit code and `(name, passed, value,
/// bound)` for every certificate.
#[pyfunction]
#[pyo3(signature = (command, config, out))]
fn run_command(command: &str, config: &str, out: PathBuf) -> PyResult<(i32, Vec<(String, bool, f64, f64)>)> {
    let cmd = Command::parse(command).ok_or_else(|| PyValueError::new_err(format!("unknown command `{command}`")))?;
    let cfg: RunConfig = parse_config(config).map_err(to_py)?;
    let outcome = pipeline::run_command(cmd, &cfg, &out).map_err(to_py)?;
    let certs = outcome
        .certificates
        .iter()
        .map(|c| (c.name.clone(), c.passed, c.value, c.bound))
        .collect();
    Ok((outcome.exit_code(), certs))
}

#[pymodule]
fn oseen_stab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyDesign>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay_rate, m)?)?;
    m.add_function(wrap_pyfunction!(closed_loop_rate, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
