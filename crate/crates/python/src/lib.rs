//! Python bindings: materials, weights, and a steppable simulation.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use debye_cq::config::{load_config, parse_config, preset, Scheme, SimConfig};
use debye_cq::material::{validate_model, DebyePole, MaterialModel, PhysicalConstants};
use debye_cq::run::{compare_schemes, prepare, run_simulation, AppError, Prepared};
use debye_cq::stepper::{dissipation_residual, energy as discrete_energy, SimState, Stepper};
use debye_cq::weights::{self, ContourParams};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn app_err(e: AppError) -> PyErr {
    match e {
        AppError::Numerical(msg) => PyRuntimeError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "MaterialModel", module = "debyecq", from_py_object)]
#[derive(Clone)]
struct PyMaterial {
    inner: MaterialModel,
}

#[pymethods]
impl PyMaterial {
    /// `poles` is a list of `(delta_eps, tau_relax)` pairs, `tau_relax` in seconds.
    #[new]
    #[pyo3(signature = (name, eps_inf_prime, poles = Vec::new()))]
    fn new(name: String, eps_inf_prime: f64, poles: Vec<(f64, f64)>) -> PyResult<Self> {
        let poles = poles.into_iter().map(|(d, t)| DebyePole::new(d, t)).collect();
        MaterialModel::new(name, eps_inf_prime, poles).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn vacuum(name: String) -> Self {
        Self {
            inner: MaterialModel::vacuum(name),
        }
    }

    #[staticmethod]
    fn five_pole_tissue() -> Self {
        Self {
            inner: MaterialModel::five_pole_tissue(),
        }
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn eps_inf_prime(&self) -> f64 {
        self.inner.eps_inf_prime
    }

    #[getter]
    fn eps_inf(&self) -> f64 {
        self.inner.eps_inf()
    }

    #[getter]
    fn poles(&self) -> Vec<(f64, f64)> {
        self.inner.poles.iter().map(|p| (p.delta_eps, p.tau_relax)).collect()
    }

    #[getter]
    fn static_susceptibility(&self) -> f64 {
        self.inner.static_susceptibility()
    }

    /// Susceptibility at complex frequency `s` (1/s).
    fn chi_hat(&self, s: Complex64) -> PyResult<Complex64> {
        self.inner.chi_hat(s).map_err(value_err)
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = validate_model(&self.inner);
        let d = PyDict::new(py);
        d.set_item("valid", report.valid)?;
        d.set_item("eps_inf", report.eps_inf)?;
        d.set_item("static_susceptibility", report.static_susceptibility)?;
        d.set_item("violations", report.violations)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "MaterialModel({:?}, eps_inf_prime={}, poles={})",
            self.inner.name,
            self.inner.eps_inf_prime,
            self.inner.poles.len()
        )
    }
}

/// Exact weights from the per-pole recurrence.
#[pyfunction]
fn weights_recurrence(model: &PyMaterial, tau: f64, n: usize) -> PyResult<Vec<f64>> {
    weights::weights_debye_model(&model.inner, &PhysicalConstants::default(), tau, n)
        .map(|t| t.weights)
        .map_err(value_err)
}

/// Weights by FFT over a circle of radius `rho`; defaults follow the table length.
#[pyfunction]
#[pyo3(signature = (model, tau, n, rho = None, fft_length = None))]
fn weights_fft(model: &PyMaterial, tau: f64, n: usize, rho: Option<f64>, fft_length: Option<usize>) -> PyResult<Vec<f64>> {
    let default = ContourParams::default_for(n);
    let params = ContourParams {
        fft_length: fft_length.unwrap_or(default.fft_length),
        radius: rho.unwrap_or(default.radius),
    };
    weights::weights_fft(&model.inner, &PhysicalConstants::default(), tau, n, &params)
        .map(|t| t.weights)
        .map_err(value_err)
}

fn load(source: &str) -> PyResult<SimConfig> {
    if source.contains('\n') || source.contains('=') {
        parse_config(source).map_err(value_err)
    } else if source.ends_with(".toml") {
        load_config(&PathBuf::from(source)).map_err(value_err)
    } else {
        preset(source).map_err(value_err)
    }
}

/// One scheme on one configuration, advanced on demand.
#[pyclass(name = "Simulation", module = "debyecq", unsendable)]
struct PySimulation {
    prep: Prepared,
    stepper: Box<dyn Stepper>,
    scheme: Scheme,
    last_residual: Option<f64>,
}

#[pymethods]
impl PySimulation {
    /// `source` is TOML text, a path ending in `.toml`, or a preset name.
    /// `diagnostics` keeps per-pole polarizations for CQ schemes so the full energy is available.
    #[new]
    #[pyo3(signature = (source, scheme = None, diagnostics = true))]
    fn new(source: &str, scheme: Option<&str>, diagnostics: bool) -> PyResult<Self> {
        let mut config = load(source)?;
        if let Some(s) = scheme {
            config.scheme = s.parse().map_err(value_err)?;
        }
        let prep = prepare(&config).map_err(app_err)?;
        let stepper = prep.build_stepper(config.scheme, None, diagnostics).map_err(app_err)?;
        Ok(Self {
            prep,
            stepper,
            scheme: config.scheme,
            last_residual: None,
        })
    }

    /// Advances `n` steps. Returns the step index reached.
    #[pyo3(signature = (n = 1))]
    fn step(&mut self, n: usize) -> PyResult<usize> {
        for _ in 0..n {
            let prev: SimState = self.stepper.state().clone();
            self.stepper.step().map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
            let state = self.stepper.state();
            if !state.is_finite() {
                return Err(PyRuntimeError::new_err(format!("non-finite field values at step {}", state.step)));
            }
            self.last_residual = dissipation_residual(&prev, state, &self.prep.ops, self.prep.tau)
                .ok()
                .and_then(|r| r.residual);
        }
        Ok(self.stepper.state().step)
    }

    /// Runs the remaining configured steps.
    fn run(&mut self) -> PyResult<usize> {
        let remaining = self.prep.n_steps().saturating_sub(self.stepper.state().step);
        self.step(remaining)
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.scheme.name()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.prep.tau
    }

    #[getter]
    fn tau_max(&self) -> f64 {
        self.prep.cfl.tau_max
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.prep.n_steps()
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.stepper.state().step
    }

    #[getter]
    fn time(&self) -> f64 {
        self.stepper.state().time(self.prep.tau)
    }

    fn nodes(&self) -> Vec<f64> {
        self.prep.ops.mesh.nodes()
    }

    fn midpoints(&self) -> Vec<f64> {
        self.prep.ops.mesh.midpoints()
    }

    fn e(&self) -> Vec<f64> {
        self.stepper.state().e.clone()
    }

    /// Magnetic field at the last half step, one value per cell.
    fn h(&self) -> Vec<f64> {
        self.stepper.state().h_half.clone()
    }

    fn p(&self) -> Vec<f64> {
        self.stepper.state().p_total.clone()
    }

    /// Discrete energy (J/m^2) and the balance residual of the last step, if known.
    fn energy<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = discrete_energy(self.stepper.state(), &self.prep.ops);
        let d = PyDict::new(py);
        d.set_item("energy", report.energy)?;
        d.set_item("polarization_included", report.polarization_included)?;
        d.set_item("residual", self.last_residual)?;
        Ok(d)
    }

    #[getter]
    fn stored_vectors(&self) -> Option<usize> {
        self.stepper.stored_vectors()
    }

    #[getter]
    fn degraded(&self) -> bool {
        self.stepper.degraded()
    }
}

/// Largest stable time step of a configuration.
#[pyfunction]
fn cfl(source: &str) -> PyResult<f64> {
    Ok(prepare(&load(source)?).map_err(app_err)?.cfl.tau_max)
}

/// Runs `schemes` in lockstep; returns the maximal differences and the verdict.
#[pyfunction]
#[pyo3(signature = (source, schemes, tol = None))]
fn compare<'py>(py: Python<'py>, source: &str, schemes: Vec<String>, tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let mut config = load(source)?;
    config.outputs.comparison_path = None;
    let schemes = schemes
        .iter()
        .map(|s| s.parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    let tolerance = tol.unwrap_or(config.compare.tolerance);
    let report = compare_schemes(&config, &schemes, tolerance).map_err(app_err)?;
    let d = PyDict::new(py);
    d.set_item("steps", report.steps)?;
    d.set_item("max_diff", report.max_diff.to_vec())?;
    d.set_item("max_magnitude", report.max_magnitude.to_vec())?;
    d.set_item("relative_difference", report.relative_difference())?;
    d.set_item("passed", report.passed())?;
    Ok(d)
}

/// Same as the `simulate` subcommand; output paths resolve against the working directory.
#[pyfunction]
#[pyo3(signature = (source, scheme = None, steps = None))]
fn simulate<'py>(py: Python<'py>, source: &str, scheme: Option<&str>, steps: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let mut config = load(source)?;
    if let Some(s) = scheme {
        config.scheme = s.parse().map_err(value_err)?;
    }
    if let Some(n) = steps {
        config.time.n_steps = n;
    }
    let summary = run_simulation(&config, None).map_err(app_err)?;
    let d = PyDict::new(py);
    d.set_item("steps", summary.steps)?;
    d.set_item("tau", summary.tau)?;
    d.set_item("initial_energy", summary.initial_energy)?;
    d.set_item("final_energy", summary.final_energy)?;
    d.set_item("warnings", summary.warnings)?;
    d.set_item(
        "written",
        summary.written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn debyecq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMaterial>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(weights_recurrence, m)?)?;
    m.add_function(wrap_pyfunction!(weights_fft, m)?)?;
    m.add_function(wrap_pyfunction!(cfl, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_dispatch_by_shape() {
        assert_eq!(load("tissue-interface").unwrap().domain.n_cells, 1024);
        assert!(load("missing-preset").is_err());
        assert!(load("no/such/file.toml").is_err());
        let text = "[domain]\nz_min = 0.0\nz_max = 1.0\nn_cells = 8\n[time]\ncfl_fraction = 0.5\nn_steps = 3\n\
                    [[materials]]\nname = \"air\"\n[[layout]]\nz_start = 0.0\nz_end = 1.0\nmaterial = \"air\"\n\
                    [initial_condition]\ntype = \"zero\"\n";
        assert_eq!(load(text).unwrap().time.n_steps, 3);
    }
}
