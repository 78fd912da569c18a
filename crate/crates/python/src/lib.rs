//! Python module `pybrillouin`: parameters, steady state, moments, ensembles,
//! spectra and depletion.
//!
//! Rates, couplings and detunings are in the library's internal rate units,
//! which equal the quoted Hz values under the default `as_given` convention.

use brillouin_cooling::depletion::{self, PropagationOptions};
use brillouin_cooling::langevin::{self, NoiseSpec, TimeGrid};
use brillouin_cooling::moments::{self, MomentState};
use brillouin_cooling::spectrum::{self, FrequencyGrid};
use brillouin_cooling::{steady, Detuning, Error, RatesConvention};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

#[pyclass(name = "SystemParams", module = "pybrillouin")]
struct PySystemParams {
    inner: brillouin_cooling::SystemParams,
}

#[pymethods]
impl PySystemParams {
    /// Defaults are the tapered chalcogenide fiber.
    #[new]
    #[pyo3(signature = (
        omega_b_hz = 7.38e9,
        gamma_m_hz = 46.8e6,
        gamma_o_hz = 364e6,
        gain_total = 164.0,
        gain_intrinsic = Some(1.32e-9),
        length = 0.5,
        refractive_index = 2.5,
        temperature = 293.0,
        rates_convention = "as_given",
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        omega_b_hz: f64,
        gamma_m_hz: f64,
        gamma_o_hz: f64,
        gain_total: f64,
        gain_intrinsic: Option<f64>,
        length: f64,
        refractive_index: f64,
        temperature: f64,
        rates_convention: &str,
    ) -> PyResult<Self> {
        let rates_convention: RatesConvention = rates_convention.parse().map_err(PyValueError::new_err)?;
        let inner = brillouin_cooling::SystemParams {
            omega_b_hz,
            gamma_m_hz,
            gamma_o_hz,
            gain_total,
            gain_intrinsic,
            length,
            refractive_index,
            temperature,
            rates_convention,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn omega_b_hz(&self) -> f64 {
        self.inner.omega_b_hz
    }

    #[getter]
    fn gamma_m_hz(&self) -> f64 {
        self.inner.gamma_m_hz
    }

    #[getter]
    fn gamma_o_hz(&self) -> f64 {
        self.inner.gamma_o_hz
    }

    #[getter]
    fn gain_total(&self) -> f64 {
        self.inner.gain_total
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.inner.temperature
    }

    #[getter]
    fn rates_convention(&self) -> &'static str {
        self.inner.rates_convention.as_str()
    }

    fn thermal_occupation(&self) -> f64 {
        self.inner.thermal_occupation()
    }

    fn total_linewidth(&self) -> f64 {
        self.inner.total_linewidth()
    }

    fn coupling_for_power(&self, power: f64) -> f64 {
        brillouin_cooling::coupling_for_power(&self.inner, power)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(omega_b_hz={}, gamma_m_hz={}, gamma_o_hz={}, gain_total={}, length={}, temperature={}, rates_convention='{}')",
            p.omega_b_hz,
            p.gamma_m_hz,
            p.gamma_o_hz,
            p.gain_total,
            p.length,
            p.temperature,
            p.rates_convention.as_str()
        )
    }
}

fn detuning(delta1: f64, delta2: f64) -> PyResult<Detuning> {
    let d = Detuning::new(delta1, delta2);
    d.validate().map_err(to_py)?;
    Ok(d)
}

#[pyfunction]
fn bose_einstein_occupation(omega_hz: f64, temperature: f64) -> PyResult<f64> {
    brillouin_cooling::bose_einstein_occupation(omega_hz, temperature).map_err(to_py)
}

#[pyfunction]
fn effective_temperature(occupation: f64, omega_hz: f64) -> PyResult<f64> {
    brillouin_cooling::effective_temperature(occupation, omega_hz).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (params, g_om, delta1 = 0.0, delta2 = 0.0))]
fn phonon_occupation(params: &PySystemParams, g_om: f64, delta1: f64, delta2: f64) -> PyResult<f64> {
    Ok(steady::phonon_occupation_detuned(&params.inner, g_om, &detuning(delta1, delta2)?))
}

#[pyfunction]
fn effective_linewidth(params: &PySystemParams, g_om: f64) -> f64 {
    steady::effective_linewidth(&params.inner, g_om)
}

#[pyfunction]
fn occupation_floor(params: &PySystemParams) -> f64 {
    steady::occupation_floor(&params.inner)
}

#[pyfunction]
fn power_for_occupation(params: &PySystemParams, target: f64) -> PyResult<f64> {
    steady::power_for_occupation(&params.inner, target).map_err(to_py)
}

/// Rows of (power, g_om, n_b_ss, t_eff, gamma_eff, cooling_rate).
#[pyfunction]
#[pyo3(signature = (params, powers, delta1 = 0.0, delta2 = 0.0))]
fn power_sweep(
    params: &PySystemParams,
    powers: Vec<f64>,
    delta1: f64,
    delta2: f64,
) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64)>> {
    let result = steady::power_sweep(&params.inner, &powers, &detuning(delta1, delta2)?).map_err(to_py)?;
    Ok(result
        .rows
        .iter()
        .map(|r| {
            let o = r.observables;
            (r.power, r.g_om, o.n_b_ss, o.t_eff, o.gamma_eff, o.cooling_rate)
        })
        .collect())
}

fn moments_dict<'py>(py: Python<'py>, s: &MomentState) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_a", s.n_a)?;
    d.set_item("n_b", s.n_b)?;
    d.set_item("coherence", (s.coherence.re, s.coherence.im))?;
    Ok(d)
}

/// Stationary moments {n_a, n_b, coherence: (re, im)}.
#[pyfunction]
#[pyo3(signature = (params, g_om, delta1 = 0.0, delta2 = 0.0))]
fn settle<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    g_om: f64,
    delta1: f64,
    delta2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = moments::settle(&params.inner, g_om, &detuning(delta1, delta2)?).map_err(to_py)?;
    moments_dict(py, &s)
}

/// Moment trajectory from the thermal state: {t, n_a, n_b, converged}.
#[pyfunction]
#[pyo3(signature = (params, g_om, t_end, tol = 1e-10, delta1 = 0.0, delta2 = 0.0))]
fn integrate<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    g_om: f64,
    t_end: f64,
    tol: f64,
    delta1: f64,
    delta2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let traj = py
        .detach(|| moments::integrate(&MomentState::thermal(p), p, g_om, &Detuning::new(delta1, delta2), t_end, tol))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("t", traj.samples.iter().map(|(t, _)| *t).collect::<Vec<_>>())?;
    d.set_item("n_a", traj.samples.iter().map(|(_, s)| s.n_a).collect::<Vec<_>>())?;
    d.set_item("n_b", traj.samples.iter().map(|(_, s)| s.n_b).collect::<Vec<_>>())?;
    d.set_item("converged", traj.meta.converged)?;
    Ok(d)
}

/// Langevin ensemble on the coarsest admissible grid: {mean, std_error, count, photons}.
#[pyfunction]
#[pyo3(signature = (params, g_om, count, base_seed = 1, delta1 = 0.0, delta2 = 0.0))]
fn run_ensemble<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    g_om: f64,
    count: usize,
    base_seed: u64,
    delta1: f64,
    delta2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let det = detuning(delta1, delta2)?;
    let grid = TimeGrid::default_for(p, g_om, &det);
    let ens = py
        .detach(|| langevin::run_ensemble(p, g_om, &det, &NoiseSpec::thermal(p), &grid, count, base_seed))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean", ens.phonons.mean)?;
    d.set_item("std_error", ens.phonons.std_error)?;
    d.set_item("count", ens.count)?;
    d.set_item("photons", ens.photons.mean)?;
    Ok(d)
}

/// Phonon spectral density on the default grid: (offsets, psd).
#[pyfunction]
#[pyo3(signature = (params, g_om, delta1 = 0.0, delta2 = 0.0))]
fn acoustic_psd(params: &PySystemParams, g_om: f64, delta1: f64, delta2: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = &params.inner;
    let det = detuning(delta1, delta2)?;
    let trace = spectrum::acoustic_psd(p, g_om, &det, &FrequencyGrid::default_for(p, g_om, &det)).map_err(to_py)?;
    Ok((trace.offsets, trace.psd))
}

/// Lorentzian fit of the phonon spectrum: {center, fwhm, height, relative_residual, integrated}.
#[pyfunction]
#[pyo3(signature = (params, g_om, delta1 = 0.0, delta2 = 0.0))]
fn fit_spectrum<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    g_om: f64,
    delta1: f64,
    delta2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let det = detuning(delta1, delta2)?;
    let trace = spectrum::acoustic_psd(p, g_om, &det, &FrequencyGrid::default_for(p, g_om, &det)).map_err(to_py)?;
    let fit = spectrum::fit_lorentzian(&trace).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("center", fit.center)?;
    d.set_item("fwhm", fit.fwhm)?;
    d.set_item("height", fit.height)?;
    d.set_item("relative_residual", fit.relative_residual)?;
    d.set_item("integrated", trace.integrated_occupation())?;
    Ok(d)
}

/// Pump and Stokes along the waveguide: {z, pump, stokes, depletion_fraction}.
#[pyfunction]
#[pyo3(signature = (params, pump_in, stokes_seed = 1e-9, steps = 2000, loss = 0.0))]
fn propagate<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    pump_in: f64,
    stokes_seed: f64,
    steps: usize,
    loss: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let prof = depletion::propagate(&params.inner, pump_in, stokes_seed, &PropagationOptions { steps, loss })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("depletion_fraction", prof.depletion_fraction())?;
    d.set_item("z", prof.z)?;
    d.set_item("pump", prof.pump)?;
    d.set_item("stokes", prof.stokes)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (params, seed = 1e-9, fraction = 0.01, max_power = 10.0))]
fn depletion_threshold(params: &PySystemParams, seed: f64, fraction: f64, max_power: f64) -> PyResult<f64> {
    depletion::depletion_threshold(&params.inner, seed, fraction, max_power, &PropagationOptions::default())
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (params, exponent, fraction = 0.01))]
fn seed_for_threshold(params: &PySystemParams, exponent: f64, fraction: f64) -> PyResult<f64> {
    depletion::seed_for_threshold(&params.inner, exponent, fraction).map_err(to_py)
}

#[pyfunction]
fn small_signal_gain(params: &PySystemParams, pump_in: f64) -> f64 {
    depletion::small_signal_gain(&params.inner, pump_in)
}

#[pymodule]
fn pybrillouin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", brillouin_cooling::VERSION)?;
    m.add_class::<PySystemParams>()?;
    m.add_function(wrap_pyfunction!(bose_einstein_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(effective_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(phonon_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(effective_linewidth, m)?)?;
    m.add_function(wrap_pyfunction!(occupation_floor, m)?)?;
    m.add_function(wrap_pyfunction!(power_for_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(power_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(settle, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(acoustic_psd, m)?)?;
    m.add_function(wrap_pyfunction!(fit_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(depletion_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(seed_for_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(small_signal_gain, m)?)?;
    Ok(())
}
