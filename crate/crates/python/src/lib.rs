//! Python bindings: parameters, mode quantities, conditional covariances,
//! entanglement, sweeps, and the Monte Carlo cross-check.

use std::collections::BTreeMap;

use optoent::gaussian::{self, combine_modes_normalized, entanglement_from_matrix};
use optoent::model::{self, DampingModel, MeasurementChannel, ModeLabel, ModeSpec, PhysicalParams};
use optoent::montecarlo::{simulate_ensemble as simulate, TrajectoryConfig};
use optoent::riccati::{self, Cov2};
use optoent::sweep::{self, OutputField};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pyoptoent, OptoentError, PyException);

fn to_py(e: optoent::Error) -> PyErr {
    match e {
        optoent::Error::InvalidParameter { .. } | optoent::Error::Domain { .. } => PyValueError::new_err(e.to_string()),
        other => OptoentError::new_err(format!("{}: {other}", other.kind())),
    }
}

fn channel(name: &str) -> PyResult<MeasurementChannel> {
    MeasurementChannel::parse(name)
        .ok_or_else(|| PyValueError::new_err(format!("channel must be 'x' or 'y', got {name:?}")))
}

fn tuple(v: Cov2) -> (f64, f64, f64) {
    (v.v11, v.v12, v.v22)
}

/// Laboratory parameters in SI units with angular frequencies [rad/s].
#[pyclass(name = "Params", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyParams {
    mass: f64,
    omega: f64,
    gamma_bare: f64,
    temperature: f64,
    gamma_m: f64,
    kappa_minus: f64,
    zeta: f64,
    delta_minus: f64,
    coupling: f64,
    eta: f64,
    n_th_optical: f64,
    /// "structural" or "velocity".
    damping: String,
}

impl PyParams {
    fn to_core(&self) -> PyResult<PhysicalParams> {
        let damping = match self.damping.as_str() {
            "structural" => DampingModel::Structural,
            "velocity" => DampingModel::Velocity,
            other => {
                return Err(PyValueError::new_err(format!("damping must be 'structural' or 'velocity', got {other:?}")))
            }
        };
        Ok(PhysicalParams {
            mass: self.mass,
            omega: self.omega,
            gamma_bare: self.gamma_bare,
            temperature: self.temperature,
            gamma_m: self.gamma_m,
            kappa_minus: self.kappa_minus,
            zeta: self.zeta,
            delta_minus: self.delta_minus,
            coupling: self.coupling,
            eta: self.eta,
            n_th_optical: self.n_th_optical,
            damping,
            cavity: None,
        })
    }

    fn from_core(p: &PhysicalParams) -> Self {
        PyParams {
            mass: p.mass,
            omega: p.omega,
            gamma_bare: p.gamma_bare,
            temperature: p.temperature,
            gamma_m: p.gamma_m,
            kappa_minus: p.kappa_minus,
            zeta: p.zeta,
            delta_minus: p.delta_minus,
            coupling: p.coupling,
            eta: p.eta,
            n_th_optical: p.n_th_optical,
            damping: match p.damping {
                DampingModel::Structural => "structural".into(),
                DampingModel::Velocity => "velocity".into(),
            },
        }
    }
}

#[pymethods]
impl PyParams {
    /// The reference tabletop setup.
    #[staticmethod]
    fn reference_setup() -> Self {
        Self::from_core(&PhysicalParams::reference_setup())
    }

    fn validate(&self) -> PyResult<()> {
        self.to_core()?.validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(mass={}, omega={}, gamma_bare={}, temperature={}, gamma_m={}, kappa_minus={}, zeta={}, delta_minus={}, coupling={}, eta={}, n_th_optical={}, damping={:?})",
            self.mass, self.omega, self.gamma_bare, self.temperature, self.gamma_m, self.kappa_minus, self.zeta,
            self.delta_minus, self.coupling, self.eta, self.n_th_optical, self.damping
        )
    }
}

/// One mechanical mode in units of its damping rate.
#[pyclass(name = "Mode", frozen, from_py_object)]
#[derive(Clone)]
struct PyMode(ModeSpec);

#[pymethods]
impl PyMode {
    /// Dimensionless mode with unit damping.
    #[new]
    #[pyo3(signature = (quality, cooperativity, n_th, delta, eta, n_th_optical = 0.0))]
    fn new(quality: f64, cooperativity: f64, n_th: f64, delta: f64, eta: f64, n_th_optical: f64) -> PyResult<Self> {
        ModeSpec::dimensionless(quality, cooperativity, n_th, delta, eta, n_th_optical).map(PyMode).map_err(to_py)
    }

    #[getter]
    fn label(&self) -> &'static str {
        match self.0.label {
            ModeLabel::Common => "common",
            ModeLabel::Differential => "differential",
            ModeLabel::Single => "single",
        }
    }
    #[getter]
    fn quality(&self) -> f64 {
        self.0.quality
    }
    #[getter]
    fn cooperativity(&self) -> f64 {
        self.0.cooperativity
    }
    #[getter]
    fn n_th(&self) -> f64 {
        self.0.n_th
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }
    #[getter]
    fn omega_m(&self) -> f64 {
        self.0.omega_m
    }
    #[getter]
    fn gamma_m(&self) -> f64 {
        self.0.gamma_m
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }
    #[getter]
    fn g_m(&self) -> f64 {
        self.0.g_m
    }
    #[getter]
    fn quantum_cooperativity(&self) -> f64 {
        self.0.quantum_cooperativity()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mode(label={:?}, quality={}, cooperativity={}, n_th={}, delta={})",
            self.label(),
            self.0.quality,
            self.0.cooperativity,
            self.0.n_th,
            self.0.delta
        )
    }
}

/// Common and differential modes of a parameter set.
#[pyfunction]
fn mode_pair(params: &PyParams) -> PyResult<(PyMode, PyMode)> {
    let (plus, minus) = model::mode_pair(&params.to_core()?).map_err(to_py)?;
    Ok((PyMode(plus), PyMode(minus)))
}

/// Filter coefficients of a mode, in units of its damping rate.
#[pyfunction]
#[pyo3(signature = (mode, channel = "x"))]
fn filter_coefficients(mode: &PyMode, channel: &str) -> PyResult<BTreeMap<&'static str, f64>> {
    let f = model::filter_coefficients(&mode.0, self::channel(channel)?).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("measurement_rate", f.measurement_rate),
        ("cross_correlation", f.cross_correlation),
        ("force_noise", f.force_noise),
        ("residual_noise", f.residual_noise),
        ("conditional_decay", f.conditional_decay),
    ]))
}

/// Steady-state conditional covariance `(V11, V12, V22)`.
#[pyfunction]
#[pyo3(signature = (mode, channel = "x"))]
fn conditional_covariance(mode: &PyMode, channel: &str) -> PyResult<(f64, f64, f64)> {
    let coef = model::filter_coefficients(&mode.0, self::channel(channel)?).map_err(to_py)?;
    riccati::conditional_steady_state(&mode.0, &coef).map(tuple).map_err(to_py)
}

/// Steady-state unconditional covariance `(V11, V12, V22)`.
#[pyfunction]
#[pyo3(signature = (mode, channel = "x"))]
fn lyapunov_covariance(mode: &PyMode, channel: &str) -> PyResult<(f64, f64, f64)> {
    let sys = riccati::SystemMatrices::for_mode(&mode.0, self::channel(channel)?);
    riccati::lyapunov_steady_state(&sys).map(tuple).map_err(to_py)
}

/// Every sweep output at one parameter point; undefined values are None.
#[pyfunction]
#[pyo3(signature = (params, channel = "x"))]
fn evaluate_point(params: &PyParams, channel: &str) -> PyResult<BTreeMap<&'static str, Option<f64>>> {
    let report = sweep::evaluate_point(&params.to_core()?, self::channel(channel)?).map_err(to_py)?;
    Ok(OutputField::ALL.iter().map(|&f| (f.name(), report.field(f).ok())).collect())
}

/// Logarithmic-negativity exponent through the covariance-matrix route.
#[pyfunction]
#[pyo3(signature = (params, channel = "x"))]
fn epsilon_cr(params: &PyParams, channel: &str) -> PyResult<f64> {
    let ch = self::channel(channel)?;
    let (plus, minus) = model::mode_pair(&params.to_core()?).map_err(to_py)?;
    let vp = riccati::conditional_steady_state(&plus, &model::filter_coefficients(&plus, ch).map_err(to_py)?)
        .map_err(to_py)?;
    let vm = riccati::conditional_steady_state(&minus, &model::filter_coefficients(&minus, ch).map_err(to_py)?)
        .map_err(to_py)?;
    let cov = combine_modes_normalized(&vp, &vm, plus.omega_m, minus.omega_m, minus.omega_m);
    entanglement_from_matrix(&cov).map(|r| r.epsilon_cr).map_err(to_py)
}

/// Same quantity from the closed form in the filter coefficients.
#[pyfunction]
#[pyo3(signature = (params, channel = "x"))]
fn epsilon_cr_closed_form(params: &PyParams, channel: &str) -> PyResult<f64> {
    let ch = self::channel(channel)?;
    let (plus, minus) = model::mode_pair(&params.to_core()?).map_err(to_py)?;
    let fp = model::filter_coefficients(&plus, ch).map_err(to_py)?;
    let fm = model::filter_coefficients(&minus, ch).map_err(to_py)?;
    gaussian::epsilon_cr_closed_form(&fp, &fm, plus.quality, minus.quality).map_err(to_py)
}

/// Contour of a covariance's Wigner function, as a list of `(q, p)`.
#[pyfunction]
#[pyo3(signature = (covariance, omega_m = 1.0, omega_ref = 1.0, points = 256))]
fn wigner_ellipse(
    covariance: (f64, f64, f64),
    omega_m: f64,
    omega_ref: f64,
    points: usize,
) -> PyResult<Vec<(f64, f64)>> {
    let v = Cov2::new(covariance.0, covariance.1, covariance.2);
    gaussian::wigner_ellipse(&v, omega_m, omega_ref, points).map(|(_, pts)| pts).map_err(to_py)
}

/// Grid of a figure preset as a list of per-cell dicts (row-major).
#[pyfunction]
#[pyo3(signature = (name, params = None, resolution = None))]
fn figure(
    name: &str,
    params: Option<&PyParams>,
    resolution: Option<usize>,
) -> PyResult<Vec<BTreeMap<String, Option<f64>>>> {
    let base = match params {
        Some(p) => p.to_core()?,
        None => PhysicalParams::reference_setup(),
    };
    let spec = sweep::figure_preset(name, &base, resolution)
        .ok_or_else(|| PyValueError::new_err(format!("unknown figure {name:?}; known: {:?}", sweep::FIGURE_PRESETS)))?;
    let grid = sweep::run_sweep(&spec).map_err(to_py)?;
    Ok(grid
        .cells
        .iter()
        .map(|cell| {
            let mut rec: BTreeMap<String, Option<f64>> =
                grid.axes.iter().zip(&cell.coords).map(|(a, &v)| (a.param.name().to_string(), Some(v))).collect();
            rec.insert("Cq_minus".into(), cell.cq_minus);
            for &f in &grid.outputs {
                rec.insert(f.name().into(), grid.value(cell, f));
            }
            rec
        })
        .collect())
}

/// Monte Carlo estimation-error covariance against the analytic one.
#[pyfunction]
#[pyo3(signature = (mode, channel = "x", n_traj = 400, collect_relaxations = 50.0, seed = 0))]
fn simulate_ensemble(
    mode: &PyMode,
    channel: &str,
    n_traj: usize,
    collect_relaxations: f64,
    seed: u64,
) -> PyResult<BTreeMap<&'static str, (f64, f64, f64)>> {
    let cfg = TrajectoryConfig::with_defaults(mode.0, self::channel(channel)?, n_traj, collect_relaxations, seed)
        .map_err(to_py)?;
    let r = simulate(&cfg).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("covariance", tuple(r.covariance)),
        ("standard_error", tuple(r.standard_error)),
        ("analytic", tuple(r.analytic)),
    ]))
}

#[pymodule]
fn pyoptoent(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("OptoentError", m.py().get_type::<OptoentError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyMode>()?;
    m.add_function(wrap_pyfunction!(mode_pair, m)?)?;
    m.add_function(wrap_pyfunction!(filter_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_point, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_cr, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_cr_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_ellipse, m)?)?;
    m.add_function(wrap_pyfunction!(figure, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ensemble, m)?)?;
    Ok(())
}
