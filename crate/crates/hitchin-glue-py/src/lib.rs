//! Python bindings: the checks behind the CLI, with reports returned as JSON text.

use hitchin_glue::algebra::{m_phi_kernel_dim, MatSL2, C64};
use hitchin_glue::geometry::{PlumbingConfig, Side};
use hitchin_glue::linearized::{dirac_mode_kernel, SpectrumConfig};
use hitchin_glue::model::{ModelParams, WolfParams};
use hitchin_glue::report::{to_csv, to_json_object};
use hitchin_glue::studies::{self, BackgroundKind, WolfOptions};
use hitchin_glue::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: Error) -> PyErr {
    if err.is_config() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn model(alpha: f64, c_re: f64, c_im: f64) -> PyResult<ModelParams> {
    ModelParams::new(alpha, C64::new(c_re, c_im), Side::Plus).map_err(to_py)
}

/// Kernel dimension of the model Dirac operator on angular mode `j`.
#[pyfunction]
fn mode_kernel(j: i64, alpha: f64, c_re: f64, c_im: f64) -> PyResult<usize> {
    Ok(dirac_mode_kernel(j, &model(alpha, c_re, c_im)?))
}

/// Kernel dimension of `M_phi` for the trace-free matrix `[[a, b], [c, -a]]`.
#[pyfunction]
fn m_phi_kernel(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> PyResult<usize> {
    let [a, b, c] = [a, b, c].map(|(re, im)| C64::new(re, im));
    let phi = MatSL2::from_entries(a, b, c, -a).map_err(to_py)?;
    Ok(m_phi_kernel_dim(&phi))
}

/// Wolf's profile `B(y)` for parameter `ell`.
#[pyfunction]
fn wolf_b(ell: f64, y: f64) -> PyResult<f64> {
    Ok(WolfParams::new(ell).map_err(to_py)?.b_of_y(y))
}

#[pyfunction]
#[pyo3(signature = (samples=1000, seed=0))]
fn algebra_suite(samples: usize, seed: u64) -> String {
    to_json_object(&studies::algebra_suite(samples, seed))
}

#[pyfunction]
#[pyo3(signature = (alpha=0.25, c_re=0.0, c_im=0.5, r=0.1, n_tau=129, modes=4, samples=100, seed=0))]
#[allow(clippy::too_many_arguments)]
fn model_check(alpha: f64, c_re: f64, c_im: f64, r: f64, n_tau: usize, modes: usize, samples: usize, seed: u64) -> PyResult<String> {
    let cfg = PlumbingConfig::new(r, n_tau, modes).map_err(to_py)?;
    let row = studies::model_check(&model(alpha, c_re, c_im)?, &cfg, samples, seed).map_err(to_py)?;
    Ok(to_json_object(&row))
}

#[pyfunction]
#[pyo3(signature = (ell=0.5, n_tau=257, refinements=3))]
fn wolf_validate(ell: f64, n_tau: usize, refinements: usize) -> PyResult<String> {
    let opts = WolfOptions { n_tau, refinements, ..Default::default() };
    Ok(to_json_object(&studies::wolf_validate(ell, &opts).map_err(to_py)?))
}

/// Spectral sweep on the model background as CSV.
#[pyfunction]
#[pyo3(signature = (radii, alpha=0.25, c_re=0.0, c_im=0.5, n_tau=257, modes=4, seed=0))]
#[allow(clippy::too_many_arguments)]
fn spectrum(radii: Vec<f64>, alpha: f64, c_re: f64, c_im: f64, n_tau: usize, modes: usize, seed: u64) -> PyResult<String> {
    let sc = SpectrumConfig { n_tau, n_theta_modes: modes, ..Default::default() };
    let kind = BackgroundKind::Model(model(alpha, c_re, c_im)?);
    let (_, rows) = studies::spectrum_study(&radii, &kind, &sc, seed).map_err(to_py)?;
    Ok(to_csv(&rows))
}

#[pymodule]
fn hitchin_glue_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mode_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(m_phi_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(wolf_b, m)?)?;
    m.add_function(wrap_pyfunction!(algebra_suite, m)?)?;
    m.add_function(wrap_pyfunction!(model_check, m)?)?;
    m.add_function(wrap_pyfunction!(wolf_validate, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    Ok(())
}
