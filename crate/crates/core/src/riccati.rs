//! Conditional (Kalman) and unconditional (Lyapunov) covariances of a single
//! mechanical mode.
//!
//! The state is `r = (q, p)` in the vacuum-normalised convention where the
//! ground state has covariance equal to the identity. The conditional
//! covariance obeys
//!
//! ```text
//! dV/dt = A V + V A^T + N - (V C^T + L) M^-1 (V C^T + L)^T
//! ```
//!
//! with `A = [[0, w], [-w, -g]]`, a single observation row `C`, process
//! noise entering only the momentum (`N = diag(0, nbar)`), and a noise
//! cross-correlation `L = (0, l)`.
//!
//! Solvers work in time measured in units of `1 / gamma_m` unless a system
//! is explicitly converted with [`SystemMatrices::in_rad_per_sec`].

use nalgebra::{Matrix2, Matrix4, RowVector2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FilterCoefficients, MeasurementChannel, ModeSpec};

/// Symmetric 2x2 covariance of `(q, p)`; vacuum is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub v11: f64,
    pub v12: f64,
    pub v22: f64,
}

impl Cov2 {
    pub const fn new(v11: f64, v12: f64, v22: f64) -> Self {
        Cov2 { v11, v12, v22 }
    }

    pub const fn identity() -> Self {
        Cov2::new(1.0, 0.0, 1.0)
    }

    /// Thermal state with occupation `n`: `diag(2n + 1, 2n + 1)`.
    pub fn thermal(n: f64) -> Self {
        let v = 2.0 * n + 1.0;
        Cov2::new(v, 0.0, v)
    }

    pub fn det(&self) -> f64 {
        self.v11 * self.v22 - self.v12 * self.v12
    }

    pub fn trace(&self) -> f64 {
        self.v11 + self.v22
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.v11, self.v12, self.v12, self.v22)
    }

    /// Symmetric part of `m`.
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Cov2::new(m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)])
    }

    /// Positive semidefinite within `tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.v11 >= -tol && self.v22 >= -tol && self.det() >= -tol
    }

    pub fn frobenius_distance(&self, other: &Cov2) -> f64 {
        (self.to_matrix() - other.to_matrix()).norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.to_matrix().norm()
    }
}

/// Units of the time axis of a [`SystemMatrices`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeUnits {
    /// Time measured in `1 / gamma_m`.
    Normalized,
    /// Time in seconds; rates in rad/s.
    RadPerSec { gamma_m: f64 },
}

/// Linear model of one mode under continuous measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemMatrices {
    /// Drift `[[0, w], [-w, -g]]`.
    pub drift: Matrix2<f64>,
    /// Observation row `C`.
    pub observation: RowVector2<f64>,
    /// Process-noise intensity; only the momentum entry is non-zero.
    pub noise: Matrix2<f64>,
    /// Noise cross-correlation `L`; only the momentum entry is non-zero.
    pub cross: Vector2<f64>,
    /// Measurement-noise intensity `2 eta N_th + 1`.
    pub meas_noise: f64,
    pub units: TimeUnits,
}

impl SystemMatrices {
    /// Normalised model of `mode` in `channel`.
    pub fn for_mode(mode: &ModeSpec, channel: MeasurementChannel) -> Self {
        let ModeSpec { quality, cooperativity, n_th, delta, eta, n_th_optical, .. } = *mode;
        let amp = (cooperativity * eta).sqrt();
        let u = 1.0 + 4.0 * delta * delta;
        let optical = 2.0 * n_th_optical + 1.0;
        let (obs, cross) = match channel {
            MeasurementChannel::AmplitudeX => (-4.0 * amp * delta / u, 2.0 * amp * optical / u),
            MeasurementChannel::PhaseY => (2.0 * amp / u, 4.0 * amp * delta * optical / u),
        };
        let nbar = 4.0 * n_th + 2.0 + 4.0 * cooperativity * optical / u;
        SystemMatrices {
            drift: Matrix2::new(0.0, quality, -quality, -1.0),
            observation: RowVector2::new(obs, 0.0),
            noise: Matrix2::new(0.0, 0.0, 0.0, nbar),
            cross: Vector2::new(0.0, cross),
            meas_noise: mode.measurement_noise(),
            units: TimeUnits::Normalized,
        }
    }

    /// Same system with time in seconds. Covariances are unchanged; only
    /// the time axis is rescaled.
    pub fn in_rad_per_sec(&self, gamma_m: f64) -> Self {
        let scale = match self.units {
            TimeUnits::Normalized => gamma_m,
            TimeUnits::RadPerSec { gamma_m: g } => gamma_m / g,
        };
        SystemMatrices {
            drift: self.drift * scale,
            observation: self.observation * scale.sqrt(),
            noise: self.noise * scale,
            cross: self.cross * scale.sqrt(),
            meas_noise: self.meas_noise,
            units: TimeUnits::RadPerSec { gamma_m },
        }
    }

    pub fn oscillation(&self) -> f64 {
        self.drift[(0, 1)]
    }

    pub fn damping(&self) -> f64 {
        -self.drift[(1, 1)]
    }

    /// Momentum-diffusion intensity nbar.
    pub fn force_noise(&self) -> f64 {
        self.noise[(1, 1)]
    }

    /// `C^T C / M`, the measurement rate in these units.
    pub fn measurement_rate(&self) -> f64 {
        self.observation[0].powi(2) / self.meas_noise
    }
}

/// Right-hand side of the Riccati equation.
pub fn riccati_rhs(v: &Cov2, sys: &SystemMatrices) -> Matrix2<f64> {
    let vm = v.to_matrix();
    let a = &sys.drift;
    let gain_num = vm * sys.observation.transpose() + sys.cross;
    let out = a * vm + vm * a.transpose() + sys.noise - gain_num * gain_num.transpose() / sys.meas_noise;
    0.5 * (out + out.transpose())
}

/// Kalman gain `(V C^T + L) / M`.
pub fn kalman_gain(v: &Cov2, sys: &SystemMatrices) -> Vector2<f64> {
    (v.to_matrix() * sys.observation.transpose() + sys.cross) / sys.meas_noise
}

/// Closed-loop drift `A - K C` of the estimation error.
pub fn error_drift(v: &Cov2, sys: &SystemMatrices) -> Matrix2<f64> {
    sys.drift - kalman_gain(v, sys) * sys.observation
}

/// Analytic steady-state conditional covariance in normalised units.
pub fn steady_state_analytic(coef: &FilterCoefficients, quality: f64) -> Result<Cov2> {
    let lambda = coef.measurement_rate;
    if !(lambda > 0.0) {
        return Err(Error::ZeroMeasurementRate);
    }
    let g1 = coef.conditional_excess;
    let g = coef.conditional_decay;
    let cross = coef.cross_correlation;
    Ok(Cov2::new(
        g1 / lambda,
        g1 * g1 / (2.0 * lambda * quality),
        g1 * (2.0 * quality * (quality + cross) + g * g1) / (2.0 * lambda * quality * quality),
    ))
}

/// The three scalar steady-state conditions, written in the form
/// `2Q V12 - l V11^2`, `(1 + l V11) V12 + Q (V11 - V22) + L V11`,
/// `2 V22 + 2Q V12 + (sqrt(l) V12 + L / sqrt(l))^2 - nbar`.
pub fn steady_state_residuals(v: &Cov2, coef: &FilterCoefficients, quality: f64) -> [f64; 3] {
    let l = coef.measurement_rate;
    let cross = coef.cross_correlation;
    let Cov2 { v11, v12, v22 } = *v;
    [
        2.0 * quality * v12 - l * v11 * v11,
        (1.0 + l * v11) * v12 + (v11 - v22) * quality + cross * v11,
        2.0 * v22 + 2.0 * quality * v12 + (l.sqrt() * v12 + cross / l.sqrt()).powi(2) - coef.force_noise,
    ]
}

/// Unconditional covariance, `A V + V A^T + N = 0`, for the oscillator drift.
///
/// Closed form for `A = [[0, w], [-w, -g]]` and symmetric
/// `N = [[a, b], [b, c]]`:
/// `V12 = -a / 2w`, `V22 = (a + c) / 2g`, `V11 = V22 + (b - g V12) / w`.
pub fn lyapunov_steady_state(sys: &SystemMatrices) -> Result<Cov2> {
    let w = sys.oscillation();
    let g = sys.damping();
    let structured = sys.drift[(0, 0)] == 0.0 && sys.drift[(1, 0)] == -w;
    if !structured {
        return lyapunov_vectorized(&sys.drift, &sys.noise);
    }
    if !(g > 0.0) || w == 0.0 {
        return Err(Error::NotHurwitz);
    }
    let (a, b, c) = (sys.noise[(0, 0)], 0.5 * (sys.noise[(0, 1)] + sys.noise[(1, 0)]), sys.noise[(1, 1)]);
    let v12 = -a / (2.0 * w);
    let v22 = (a + c) / (2.0 * g);
    let v11 = v22 + (b - g * v12) / w;
    Ok(Cov2::new(v11, v12, v22))
}

/// Generic 2x2 Lyapunov solve through the vectorised 4x4 system
/// `(I (x) A + A (x) I) vec V = -vec N`.
pub fn lyapunov_vectorized(a: &Matrix2<f64>, n: &Matrix2<f64>) -> Result<Cov2> {
    // Hurwitz for 2x2: negative trace and positive determinant.
    if !(a.trace() < 0.0 && a.determinant() > 0.0) {
        return Err(Error::NotHurwitz);
    }
    let id = Matrix2::<f64>::identity();
    let op: Matrix4<f64> = id.kronecker(a) + a.kronecker(&id);
    let rhs = -Vector4::new(n[(0, 0)], n[(1, 0)], n[(0, 1)], n[(1, 1)]);
    let x = op.lu().solve(&rhs).ok_or(Error::NotHurwitz)?;
    let m = Matrix2::new(x[0], x[2], x[1], x[3]);
    Ok(Cov2::from_matrix(&m))
}

/// Steady-state conditional covariance for any measurement rate.
///
/// Uses the analytic solution when the measurement rate is positive. With
/// no measurement signal the filter still learns the part of the force
/// noise correlated with the detected light, so the covariance is the
/// Lyapunov solution with that part removed.
pub fn conditional_steady_state(mode: &ModeSpec, coef: &FilterCoefficients) -> Result<Cov2> {
    if coef.measurement_rate > 0.0 {
        return steady_state_analytic(coef, mode.quality);
    }
    let sys = SystemMatrices {
        drift: Matrix2::new(0.0, mode.quality, -mode.quality, -1.0),
        observation: RowVector2::zeros(),
        noise: Matrix2::new(0.0, 0.0, 0.0, coef.residual_noise),
        cross: Vector2::zeros(),
        meas_noise: mode.measurement_noise(),
        units: TimeUnits::Normalized,
    };
    lyapunov_steady_state(&sys)
}

/// Settings for [`integrate_riccati`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    /// Nominal step. `None` picks `0.01 / max(|w|, |g|)`.
    pub dt: Option<f64>,
    /// Largest step as a fraction of `1 / |A - K C|_F`. While the gain is
    /// large (e.g. starting from a hot thermal state) this keeps RK4 inside
    /// its stability region; near the fixed point the nominal step wins.
    pub stiffness_fraction: f64,
    /// Stop early once `|dV/dt|_F <= tol * max(nbar, 1)`.
    pub stationary_tol: Option<f64>,
    /// Keep every n-th state in the returned trajectory (0 keeps only the
    /// endpoints).
    pub record_every: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions { dt: None, stiffness_fraction: 0.02, stationary_tol: Some(1e-10), record_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTrajectory {
    /// `(t, V(t))` samples, always including the first and last state.
    pub samples: Vec<(f64, Cov2)>,
    pub steps: usize,
    /// True when the stationarity test stopped the run before `t_end`.
    pub stationary: bool,
}

impl RiccatiTrajectory {
    pub fn final_state(&self) -> Cov2 {
        self.samples.last().expect("trajectory always has a sample").1
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().expect("trajectory always has a sample").0
    }
}

/// One classical RK4 step followed by symmetrisation.
pub fn rk4_step(v: &Cov2, sys: &SystemMatrices, dt: f64) -> Cov2 {
    let at = |m: Matrix2<f64>| riccati_rhs(&Cov2::from_matrix(&m), sys);
    let v0 = v.to_matrix();
    let k1 = at(v0);
    let k2 = at(v0 + k1 * (dt / 2.0));
    let k3 = at(v0 + k2 * (dt / 2.0));
    let k4 = at(v0 + k3 * dt);
    Cov2::from_matrix(&(v0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)))
}

/// Integrates the Riccati equation from `v0` over `[0, t_end]`.
pub fn integrate_riccati(
    v0: Cov2,
    sys: &SystemMatrices,
    t_end: f64,
    opts: IntegrationOptions,
) -> Result<RiccatiTrajectory> {
    if !v0.is_psd(1e-9) {
        return Err(Error::NonPhysicalState { reason: "initial covariance is not positive semidefinite".into() });
    }
    let nominal = opts.dt.unwrap_or_else(|| 0.01 / sys.oscillation().abs().max(sys.damping().abs()));
    let noise_scale = sys.force_noise().max(1.0);

    let mut samples = vec![(0.0, v0)];
    let mut v = v0;
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut stationary = false;
    while t < t_end {
        if let Some(tol) = opts.stationary_tol {
            if riccati_rhs(&v, sys).norm() <= tol * noise_scale {
                stationary = true;
                break;
            }
        }
        let stiff = error_drift(&v, sys).norm();
        let mut dt = nominal.min(opts.stiffness_fraction / stiff);
        if t + dt > t_end {
            dt = t_end - t;
        }
        v = rk4_step(&v, sys, dt);
        t += dt;
        steps += 1;
        let det = v.det();
        if det < -1e-9 || !det.is_finite() {
            return Err(Error::StepSizeTooLarge { time: t, det });
        }
        if opts.record_every > 0 && steps.is_multiple_of(opts.record_every) {
            samples.push((t, v));
        }
    }
    if samples.last().map(|s| s.0) != Some(t) {
        samples.push((t, v));
    }
    Ok(RiccatiTrajectory { samples, steps, stationary })
}
