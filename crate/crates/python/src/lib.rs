//! Python module `segwave`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use segwave::frontsim::{self, FrontSimOptions, PdeState, Tracked};
use segwave::halfline::{self, GammaOptions};
use segwave::limit::{self, LimitParams, LimitSolver, DEFAULT_C_TOL};
use segwave::numerics::Grid1D;
use segwave::sweep::{self, RawEcologicalParams, SweepSpec};
use segwave::wave::{self, Normalization, Seed, SystemParams, WaveOptions};

fn to_py(e: segwave::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_norm(name: &str) -> PyResult<Normalization> {
    name.parse().map_err(to_py)
}

/// Initial slope of the half-line KPP profile with drift `c`.
#[pyfunction]
#[pyo3(signature = (c, length = 40.0, tol = 1e-11))]
fn gamma(py: Python<'_>, c: f64, length: f64, tol: f64) -> PyResult<f64> {
    let opts = GammaOptions { length, slope_tol: tol, ..GammaOptions::default() };
    py.detach(|| halfline::gamma(c, &opts)).map_err(to_py)
}

/// Limit speed: the root of the interface relation.
#[pyfunction]
#[pyo3(signature = (alpha, r, d, c_tol = DEFAULT_C_TOL))]
fn limit_speed(py: Python<'_>, alpha: f64, r: f64, d: f64, c_tol: f64) -> PyResult<f64> {
    let params = LimitParams::new(alpha, r, d).map_err(to_py)?;
    py.detach(|| limit::solve_limit_speed(&params, c_tol)).map_err(to_py)
}

/// `(verdict, c_inf, threshold)` with verdict one of `u-invades`,
/// `v-invades`, `standoff`.
#[pyfunction]
fn classify_invader(py: Python<'_>, alpha: f64, r: f64, d: f64) -> PyResult<(String, f64, f64)> {
    let params = LimitParams::new(alpha, r, d).map_err(to_py)?;
    let v = py.detach(|| limit::classify_invader(&params)).map_err(to_py)?;
    Ok((v.tag.to_string(), v.c, v.threshold))
}

/// `(k, alpha, d, r)` from the eight ecological coefficients.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn rescale(d1: f64, d2: f64, r1: f64, r2: f64, a1: f64, a2: f64, k1: f64, k2: f64) -> PyResult<(f64, f64, f64, f64)> {
    let p = sweep::rescale_parameters(&RawEcologicalParams { d1, d2, r1, r2, a1, a2, k1, k2 }).map_err(to_py)?;
    Ok((p.k, p.alpha, p.d, p.r))
}

/// Segregated limit profiles.
#[pyclass(name = "LimitProfiles", frozen)]
struct PyLimitProfiles {
    #[pyo3(get)]
    c: f64,
    #[pyo3(get)]
    interface_residual: f64,
    #[pyo3(get)]
    xi: Vec<f64>,
    #[pyo3(get)]
    u: Vec<f64>,
    #[pyo3(get)]
    v: Vec<f64>,
}

#[pyfunction]
fn limit_profiles(py: Python<'_>, alpha: f64, r: f64, d: f64) -> PyResult<PyLimitProfiles> {
    let params = LimitParams::new(alpha, r, d).map_err(to_py)?;
    let wave = py
        .detach(|| {
            let solver = LimitSolver::new();
            let c = solver.solve_limit_speed(&params, DEFAULT_C_TOL)?;
            solver.build_limit_profiles(&params, c)
        })
        .map_err(to_py)?;
    let rows = wave.rows();
    Ok(PyLimitProfiles {
        c: wave.c,
        interface_residual: wave.interface_residual,
        xi: rows.iter().map(|r| r.0).collect(),
        u: rows.iter().map(|r| r.1).collect(),
        v: rows.iter().map(|r| r.2).collect(),
    })
}

/// Finite-k travelling wave.
#[pyclass(name = "TravellingWave", frozen)]
struct PyWave {
    inner: wave::TravellingWave,
}

#[pymethods]
impl PyWave {
    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.params.k
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }

    #[getter]
    fn xi(&self) -> Vec<f64> {
        self.inner.grid().points().collect()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.values().to_vec()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v.values().to_vec()
    }

    fn segregation(&self) -> f64 {
        wave::segregation_metric(&self.inner)
    }

    fn interface_estimate(&self) -> f64 {
        wave::interface_condition_estimate(&self.inner)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner.params;
        format!("TravellingWave(k={}, alpha={}, r={}, d={}, c={})", p.k, p.alpha, p.r, p.d, self.inner.c)
    }
}

/// Solve the finite-k wave; large `k` is reached by continuation.
#[pyfunction]
#[pyo3(signature = (k, alpha, r, d, normalization = "cross"))]
fn solve_wave(py: Python<'_>, k: f64, alpha: f64, r: f64, d: f64, normalization: &str) -> PyResult<PyWave> {
    let params = SystemParams::new(k, alpha, r, d).map_err(to_py)?;
    let opts = WaveOptions::with_normalization(parse_norm(normalization)?);
    let inner = py
        .detach(|| {
            if k <= 20.0 {
                wave::solve_wave(&params, Seed::Logistic, &opts)
            } else {
                let schedule = sweep::continuation_schedule(&[k]);
                let report = wave::continue_in_k_with(&params.limit(), &schedule, &opts, &LimitSolver::new())?;
                Ok(report.waves.into_iter().last().expect("non-empty schedule"))
            }
        })
        .map_err(to_py)?;
    Ok(PyWave { inner })
}

/// Continuation report as a dict with keys `k`, `c`, `segregation`,
/// `interface`, `c_limit`.
#[pyfunction]
#[pyo3(signature = (alpha, r, d, ks, normalization = "cross"))]
fn continue_in_k<'py>(
    py: Python<'py>,
    alpha: f64,
    r: f64,
    d: f64,
    ks: Vec<f64>,
    normalization: &str,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let base = LimitParams::new(alpha, r, d).map_err(to_py)?;
    let norm = parse_norm(normalization)?;
    let report = py.detach(|| wave::continue_in_k(&base, &ks, norm)).map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("k", report.k_values)?;
    out.set_item("c", report.c_values)?;
    out.set_item("segregation", report.segregation_values)?;
    out.set_item("interface", report.interface_values)?;
    out.set_item("c_limit", report.c_limit)?;
    Ok(out)
}

/// Fitted front speed `(speed, fit_residual)` from step initial data on
/// `[-length/2, length/2]`. `only` selects a single species.
#[pyfunction]
#[pyo3(signature = (k, alpha, r, d, t_end, level = 0.5, dx = 0.1, dt = 0.01, length = 400.0, only = None))]
#[allow(clippy::too_many_arguments)]
fn front_speed(
    py: Python<'_>,
    k: f64,
    alpha: f64,
    r: f64,
    d: f64,
    t_end: f64,
    level: f64,
    dx: f64,
    dt: f64,
    length: f64,
    only: Option<&str>,
) -> PyResult<(f64, f64)> {
    let params = SystemParams::new(k, alpha, r, d).map_err(to_py)?;
    let (with_u, with_v) = match only {
        None => (true, true),
        Some("u") => (true, false),
        Some("v") => (false, true),
        Some(other) => return Err(PyValueError::new_err(format!("only must be 'u' or 'v', got {other:?}"))),
    };
    let est = py
        .detach(|| {
            let grid = Grid1D::with_max_spacing(-length / 2.0, length / 2.0, dx)?;
            let initial = PdeState::step_fronts(grid, with_u, with_v)?;
            let opts = FrontSimOptions {
                dt,
                tracked: Some(if with_u { Tracked::U } else { Tracked::V }),
                ..FrontSimOptions::default()
            };
            frontsim::measure_front_speed_with(initial, &params, t_end, level, &opts)
        })
        .map_err(to_py)?;
    Ok((est.fitted_speed, est.fit_residual))
}

/// Sweep `c_inf` over `d_grid`; returns a dict with `d`, `c_inf`
/// (None for failures), `sign_change_d`, `threshold`.
#[pyfunction]
#[pyo3(signature = (alpha, r, d_grid, out = None))]
fn run_sweep<'py>(
    py: Python<'py>,
    alpha: f64,
    r: f64,
    d_grid: Vec<f64>,
    out: Option<std::path::PathBuf>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let spec = SweepSpec { alpha, r, d_grid, k_list: None, output_path: None };
    let curve = py
        .detach(|| {
            let curve = sweep::run_sweep(&spec)?;
            if let Some(path) = &out {
                sweep::emit_report(&curve, path)?;
            }
            Ok::<_, segwave::Error>(curve)
        })
        .map_err(to_py)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("d", curve.d_values)?;
    dict.set_item("c_inf", curve.c_inf)?;
    dict.set_item("sign_change_d", curve.sign_change_d)?;
    dict.set_item("threshold", curve.predicted_threshold)?;
    Ok(dict)
}

#[pymodule(name = "segwave")]
fn segwave_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("GAMMA_AT_ZERO", halfline::GAMMA_AT_ZERO)?;
    m.add_class::<PyWave>()?;
    m.add_class::<PyLimitProfiles>()?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(limit_speed, m)?)?;
    m.add_function(wrap_pyfunction!(classify_invader, m)?)?;
    m.add_function(wrap_pyfunction!(limit_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(rescale, m)?)?;
    m.add_function(wrap_pyfunction!(solve_wave, m)?)?;
    m.add_function(wrap_pyfunction!(continue_in_k, m)?)?;
    m.add_function(wrap_pyfunction!(front_speed, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
