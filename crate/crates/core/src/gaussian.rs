//! Two-mirror Gaussian state, entanglement, squeezing, and purity.
//!
//! The common and differential modes are uncorrelated; the individual
//! mirrors are obtained from them with a half beam splitter. Because the two
//! modes oscillate at different frequencies `w+ != w-`, their dimensionless
//! covariances live in different units. They must be brought to a common
//! reference frequency (or to SI units) before the beam splitter is applied.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FilterCoefficients, HBAR};
use crate::riccati::Cov2;

const PHYSICAL_TOL: f64 = 1e-9;

/// How the entries of a [`Cov4`] are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// SI units: positions in m, momenta in kg m/s.
    Dimensional,
    /// Dimensionless, with the ground state of an oscillator at
    /// `omega_ref` mapped to the identity.
    VacuumNormalized { omega_ref: f64 },
}

/// Covariance over `(Q1, P1, Q2, P2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov4 {
    pub matrix: Matrix4<f64>,
    pub normalization: Normalization,
}

impl Cov4 {
    /// `(V1, V2, V12)` blocks.
    pub fn blocks(&self) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
        let m = &self.matrix;
        (
            m.fixed_view::<2, 2>(0, 0).into_owned(),
            m.fixed_view::<2, 2>(2, 2).into_owned(),
            m.fixed_view::<2, 2>(0, 2).into_owned(),
        )
    }

    /// Scale that maps `det` of a 2x2 block to vacuum units.
    fn block_unit(&self) -> f64 {
        match self.normalization {
            Normalization::Dimensional => (HBAR / 2.0).powi(2),
            Normalization::VacuumNormalized { .. } => 1.0,
        }
    }

    /// Smallest symplectic eigenvalue in vacuum units (>= 1 for physical states).
    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        let (v1, v2, v12) = self.blocks();
        let unit = self.block_unit();
        let delta = (v1.determinant() + v2.determinant() + 2.0 * v12.determinant()) / unit;
        let det = self.matrix.determinant() / (unit * unit);
        smaller_root(delta, det).sqrt()
    }

    pub fn is_physical(&self) -> bool {
        self.min_symplectic_eigenvalue() >= 1.0 - PHYSICAL_TOL
    }
}

/// Smaller root of `x^2 - s x + d`, evaluated without cancellation.
fn smaller_root(s: f64, d: f64) -> f64 {
    let disc = (s * s - 4.0 * d).max(0.0).sqrt();
    if s + disc == 0.0 {
        0.0
    } else {
        2.0 * d / (s + disc)
    }
}

/// Entanglement summary of a two-mode state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    /// `-log2` of the smallest partially transposed symplectic eigenvalue;
    /// positive iff the mirrors are entangled.
    pub epsilon_cr: f64,
    /// Logarithmic negativity `max(0, epsilon_cr)`.
    pub log_negativity: f64,
    /// `det V1 + det V2 - 2 det V12`, in vacuum units.
    pub sigma: f64,
    /// `det V`, in vacuum units.
    pub det: f64,
    pub nu_tilde: f64,
}

/// SI covariance of a mode with dimensionless covariance `v`, frequency
/// `omega_m`, and mass `mass`.
pub fn dimensional_covariance(v: &Cov2, omega_m: f64, mass: f64) -> Matrix2<f64> {
    let qq = HBAR / (2.0 * mass * omega_m);
    let pp = mass * HBAR * omega_m / 2.0;
    let qp = HBAR / 2.0;
    Matrix2::new(qq * v.v11, qp * v.v12, qp * v.v12, pp * v.v22)
}

/// Re-expresses a covariance normalised at `omega_m` in units of an
/// oscillator at `omega_ref`.
pub fn renormalize(v: &Cov2, omega_m: f64, omega_ref: f64) -> Cov2 {
    let r = omega_ref / omega_m;
    Cov2::new(v.v11 * r, v.v12, v.v22 / r)
}

fn beam_splitter(plus: &Matrix2<f64>, minus: &Matrix2<f64>) -> Matrix4<f64> {
    let local = (plus + minus) / 2.0;
    let corr = (plus - minus) / 2.0;
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&local);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&local);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&corr);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&corr);
    m
}

/// Two-mirror covariance in SI units from the common (`plus`) and
/// differential (`minus`) covariances.
pub fn combine_modes(plus: &Cov2, minus: &Cov2, omega_plus: f64, omega_minus: f64, mass: f64) -> Cov4 {
    let vp = dimensional_covariance(plus, omega_plus, mass);
    let vm = dimensional_covariance(minus, omega_minus, mass);
    Cov4 { matrix: beam_splitter(&vp, &vm), normalization: Normalization::Dimensional }
}

/// Two-mirror covariance in vacuum units of an oscillator at `omega_ref`.
pub fn combine_modes_normalized(plus: &Cov2, minus: &Cov2, omega_plus: f64, omega_minus: f64, omega_ref: f64) -> Cov4 {
    let vp = renormalize(plus, omega_plus, omega_ref).to_matrix();
    let vm = renormalize(minus, omega_minus, omega_ref).to_matrix();
    Cov4 { matrix: beam_splitter(&vp, &vm), normalization: Normalization::VacuumNormalized { omega_ref } }
}

/// Logarithmic negativity of a two-mode Gaussian state.
pub fn entanglement_from_matrix(cov: &Cov4) -> Result<EntanglementReport> {
    let (v1, v2, v12) = cov.blocks();
    let unit = cov.block_unit();
    let sigma = (v1.determinant() + v2.determinant() - 2.0 * v12.determinant()) / unit;
    let det = cov.matrix.determinant() / (unit * unit);
    if !(det > 0.0) {
        return Err(Error::NonPhysicalState { reason: format!("det V = {det:e} is not positive") });
    }
    let disc = sigma * sigma - 4.0 * det;
    if disc < -PHYSICAL_TOL * sigma * sigma {
        return Err(Error::NonPhysicalState { reason: format!("Sigma^2 - 4 det V = {disc:e} < 0") });
    }
    let nu2 = smaller_root(sigma, det);
    let epsilon_cr = -0.5 * nu2.log2();
    Ok(EntanglementReport { epsilon_cr, log_negativity: epsilon_cr.max(0.0), sigma, det, nu_tilde: nu2.sqrt() })
}

/// Closed-form `epsilon_cr` from the filter coefficients and quality
/// factors of both modes, bypassing every covariance matrix.
pub fn epsilon_cr_closed_form(
    plus: &FilterCoefficients,
    minus: &FilterCoefficients,
    q_plus: f64,
    q_minus: f64,
) -> Result<f64> {
    let (lp, lm) = (plus.measurement_rate, minus.measurement_rate);
    if !(lp > 0.0 && lm > 0.0) {
        return Err(Error::ZeroMeasurementRate);
    }
    let (gp, gm) = (plus.conditional_decay, minus.conditional_decay);
    let (ep, em) = (plus.conditional_excess, minus.conditional_excess);
    let (xp, xm) = (plus.cross_correlation, minus.cross_correlation);
    let (qp, qm) = (q_plus, q_minus);

    let wp = (xp + qp) / qm;
    let wm = (xm + qm) / qp;
    let s = (gp * gp + gm * gm - gp * gm - 1.0) / (qp * qm) + 2.0 * wp + 2.0 * wm;
    let radicand = (gp * gp + gm * gm - 1.0) * (gp - gm).powi(2) / (qp * qp * qm * qm)
        + 4.0 * (wp - wm).powi(2)
        + 4.0 * gp * (gp - gm) * (xp + qp) / (qp * qm * qm)
        + 4.0 * gm * (gm - gp) * (xm + qm) / (qp * qp * qm);
    if radicand < -PHYSICAL_TOL * s * s {
        return Err(Error::NonPhysicalState { reason: format!("closed-form radicand {radicand:e} < 0") });
    }
    // Per-mode determinant factors; S^2 - radicand = f+ f-.
    let fp = ep * (gp + 1.0) / (qp * qp) + 4.0 * xp / qp + 4.0;
    let fm = em * (gm + 1.0) / (qm * qm) + 4.0 * xm / qm + 4.0;
    let prefactor = ep * em / (4.0 * lp * lm);
    let nu2 = prefactor * fp * fm / (s + radicand.max(0.0).sqrt());
    Ok(-0.5 * nu2.log2())
}

/// `(E_min, E_max)` eigenvalues of a 2x2 covariance.
pub fn squeeze_eigenvalues(v: &Cov2) -> (f64, f64) {
    let disc = (v.v11 - v.v22).hypot(2.0 * v.v12);
    let e_max = 0.5 * (v.trace() + disc);
    let e_min = if e_max > 0.0 { v.det() / e_max } else { 0.5 * (v.trace() - disc) };
    (e_min, e_max)
}

/// Squeezing angle `arctan sqrt((V11 - E_min) / (E_max - V11))` in `[0, pi/2]`.
///
/// This is the magnitude of the minor-axis orientation; the minor axis
/// itself points along `-sign(V12) * theta`.
pub fn squeezing_angle(v: &Cov2) -> Result<f64> {
    let disc = (v.v11 - v.v22).hypot(2.0 * v.v12);
    let (_, e_max) = squeeze_eigenvalues(v);
    if disc < 1e-12 * e_max.abs() {
        return Err(Error::DegenerateEllipse);
    }
    let diff = v.v11 - v.v22;
    Ok((disc + diff).max(0.0).sqrt().atan2((disc - diff).max(0.0).sqrt()))
}

/// States whose purity can be evaluated.
pub trait GaussianState {
    /// Determinant in vacuum units.
    fn normalized_det(&self) -> f64;
    /// Number of modes.
    fn modes(&self) -> i32;
}

impl GaussianState for Cov2 {
    fn normalized_det(&self) -> f64 {
        self.det()
    }
    fn modes(&self) -> i32 {
        1
    }
}

impl GaussianState for Cov4 {
    fn normalized_det(&self) -> f64 {
        let unit = self.block_unit();
        self.matrix.determinant() / (unit * unit)
    }
    fn modes(&self) -> i32 {
        2
    }
}

/// Gaussian purity `1 / sqrt(det V)` with vacuum = identity.
pub fn purity<S: GaussianState>(state: &S) -> Result<f64> {
    let det = state.normalized_det();
    if !(det >= 1.0 - PHYSICAL_TOL) {
        return Err(Error::NonPhysicalState { reason: format!("det V = {det} below the vacuum bound") });
    }
    Ok(1.0 / det.sqrt())
}

/// `W = W_max / e` contour of a single-mode Wigner function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerEllipse {
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Orientation of the minor (squeezed) axis from the q axis, in `[0, pi)`.
    pub angle: f64,
    /// Frequency whose vacuum defines the unit circle [rad/s].
    pub omega_ref: f64,
}

/// Contour ellipse of `v` (normalised at `omega_m`) drawn in units of an
/// oscillator at `omega_ref`, with `points` samples `(q, p)`.
///
/// The contour constant is chosen so the vacuum is the unit circle.
pub fn wigner_ellipse(
    v: &Cov2,
    omega_m: f64,
    omega_ref: f64,
    points: usize,
) -> Result<(WignerEllipse, Vec<(f64, f64)>)> {
    let w = renormalize(v, omega_m, omega_ref);
    if !(w.is_psd(0.0) && w.det() > 0.0) {
        return Err(Error::NonPhysicalState { reason: "covariance is not positive definite".into() });
    }
    let (e_min, e_max) = squeeze_eigenvalues(&w);
    let angle = match squeezing_angle(&w) {
        Ok(theta) if w.v12 > 0.0 && theta > 0.0 => PI - theta,
        Ok(theta) => theta,
        Err(_) => 0.0,
    };
    let angle = if angle >= PI { angle - PI } else { angle };
    let (a_min, a_max) = (e_min.sqrt(), e_max.sqrt());
    let (c, s) = (angle.cos(), angle.sin());
    let contour = (0..points)
        .map(|k| {
            let t = TAU * k as f64 / points as f64;
            let (x, y) = (a_min * t.cos(), a_max * t.sin());
            (c * x - s * y, s * x + c * y)
        })
        .collect();
    Ok((WignerEllipse { semi_major: a_max, semi_minor: a_min, angle, omega_ref }, contour))
}

/// Absolute difference of the squeezing angles of two modes.
pub fn angle_difference(plus: &Cov2, minus: &Cov2) -> Result<f64> {
    Ok((squeezing_angle(plus)? - squeezing_angle(minus)?).abs())
}
