//! Physical parameters and the dimensionless per-mode description.
//!
//! Everything downstream runs on [`ModeSpec`] and [`FilterCoefficients`],
//! which are expressed in units of the feedback-modified damping rate
//! `gamma_m`. This module is the only place where laboratory quantities
//! (kg, K, rad/s) enter.
//!
//! All angular frequencies and rates are stored in rad/s. Use [`hz`] to
//! convert an ordinary frequency on ingestion.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380_649e-23;

/// Converts a frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// Thermal-occupation model for the mechanical bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DampingModel {
    /// Loss angle independent of frequency: `Gamma(w) = Gamma(Omega) Omega / w`.
    #[default]
    Structural,
    /// Frequency-independent damping rate.
    Velocity,
}

/// Which output quadrature is homodyned. Both modes use the same channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasurementChannel {
    /// Amplitude quadrature (X measurement).
    AmplitudeX,
    /// Phase quadrature (Y measurement).
    PhaseY,
}

impl MeasurementChannel {
    pub fn short_name(self) -> &'static str {
        match self {
            MeasurementChannel::AmplitudeX => "x",
            MeasurementChannel::PhaseY => "y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "amplitude" | "amplitudex" => Some(MeasurementChannel::AmplitudeX),
            "y" | "phase" | "phasey" => Some(MeasurementChannel::PhaseY),
            _ => None,
        }
    }
}

/// Optional cavity block, only needed to derive `g` from the intracavity amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Cavity length [m].
    pub length: f64,
    /// Laser angular frequency [rad/s]; the cavity resonance is taken equal to it.
    pub omega_laser: f64,
    /// Input power [W]. Informational only.
    pub input_power: f64,
    /// Intracavity amplitude |a|.
    pub amplitude: f64,
}

/// Laboratory-frame inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Mirror mass [kg].
    pub mass: f64,
    /// Bare mechanical angular frequency Omega [rad/s].
    pub omega: f64,
    /// Bare mechanical decay rate Gamma(Omega) [rad/s].
    pub gamma_bare: f64,
    /// Bath temperature [K].
    pub temperature: f64,
    /// Effective mechanical decay rate under feedback [rad/s].
    pub gamma_m: f64,
    /// Optical decay rate of the differential mode [rad/s].
    pub kappa_minus: f64,
    /// Decay-rate ratio kappa_minus / kappa_plus (>= 1).
    pub zeta: f64,
    /// Detuning normalised to the differential linewidth.
    pub delta_minus: f64,
    /// Optomechanical coupling g [rad/s].
    pub coupling: f64,
    /// Detection efficiency.
    pub eta: f64,
    /// Optical thermal photon number.
    pub n_th_optical: f64,
    #[serde(default)]
    pub damping: DampingModel,
    #[serde(default)]
    pub cavity: Option<CavityParams>,
}

impl PhysicalParams {
    /// The experimental parameter set of the reference tabletop setup
    /// (7.71 mg mirrors, 2.2 Hz pendulum, 300 K, zeta = 3, delta = 0.2).
    pub fn reference_setup() -> Self {
        PhysicalParams {
            mass: 7.71e-6,
            omega: hz(2.2),
            gamma_bare: hz(1e-6),
            temperature: 300.0,
            gamma_m: hz(6.9e-3),
            kappa_minus: hz(1.64e6),
            zeta: 3.0,
            delta_minus: 0.2,
            coupling: hz(2.68e5),
            eta: 0.92,
            n_th_optical: 0.0,
            damping: DampingModel::Structural,
            cavity: Some(CavityParams { length: 0.1, omega_laser: hz(3e14), input_power: 30e-3, amplitude: 1.27e5 }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("omega", self.omega),
            ("gamma_bare", self.gamma_bare),
            ("temperature", self.temperature),
            ("gamma_m", self.gamma_m),
            ("kappa_minus", self.kappa_minus),
            ("coupling", self.coupling),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter { field, reason: format!("must be finite and > 0, got {v}") });
            }
        }
        if !(self.zeta.is_finite() && self.zeta >= 1.0) {
            return Err(Error::InvalidParameter { field: "zeta", reason: format!("must be >= 1, got {}", self.zeta) });
        }
        if !(self.delta_minus.is_finite() && self.delta_minus >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "delta_minus",
                reason: format!("must be >= 0 (anti-spring detuning is not supported), got {}", self.delta_minus),
            });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter {
                field: "eta",
                reason: format!("must lie in [0, 1], got {}", self.eta),
            });
        }
        if !(self.n_th_optical.is_finite() && self.n_th_optical >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "n_th_optical",
                reason: format!("must be >= 0, got {}", self.n_th_optical),
            });
        }
        if let Some(c) = &self.cavity {
            for (field, v) in [
                ("cavity.length", c.length),
                ("cavity.omega_laser", c.omega_laser),
                ("cavity.input_power", c.input_power),
                ("cavity.amplitude", c.amplitude),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidParameter { field, reason: format!("must be finite and >= 0, got {v}") });
                }
            }
        }
        Ok(())
    }

    /// Common-mode optical decay rate kappa_minus / zeta.
    pub fn kappa_plus(&self) -> f64 {
        self.kappa_minus / self.zeta
    }

    /// Detuning Delta [rad/s], shared by both optical modes.
    pub fn detuning(&self) -> f64 {
        self.delta_minus * self.kappa_minus
    }
}

/// Which mechanical mode a [`ModeSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    /// Symmetric combination; sees the recycled linewidth kappa_minus / zeta.
    Common,
    /// Antisymmetric combination; sees kappa_minus.
    Differential,
    /// A lone cavity with linewidth kappa_minus.
    Single,
}

/// Dimensionless description of one mechanical mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: ModeLabel,
    /// Quality factor omega_m / gamma_m.
    pub quality: f64,
    /// Cooperativity 4 g_m^2 / (gamma_m kappa).
    pub cooperativity: f64,
    /// Thermal phonon number.
    pub n_th: f64,
    /// Detuning normalised to this mode's linewidth.
    pub delta: f64,
    pub eta: f64,
    pub n_th_optical: f64,
    /// Effective angular frequency [rad/s].
    pub omega_m: f64,
    /// Effective damping rate [rad/s].
    pub gamma_m: f64,
    /// Optical linewidth seen by the mode [rad/s].
    pub kappa: f64,
    /// Rescaled coupling g sqrt(Omega / omega_m) [rad/s].
    pub g_m: f64,
}

impl ModeSpec {
    /// Builds a mode directly from its dimensionless numbers.
    ///
    /// `gamma_m` fixes the absolute time scale; the derived `omega_m`,
    /// `kappa`, and `g_m` are filled with values consistent with `quality`, `cooperativity`
    /// and a linewidth of `kappa`.
    pub fn dimensionless(
        quality: f64,
        cooperativity: f64,
        n_th: f64,
        delta: f64,
        eta: f64,
        n_th_optical: f64,
    ) -> Result<Self> {
        let gamma_m = 1.0;
        let kappa = 1e6;
        let spec = ModeSpec {
            label: ModeLabel::Single,
            quality,
            cooperativity,
            n_th,
            delta,
            eta,
            n_th_optical,
            omega_m: quality * gamma_m,
            gamma_m,
            kappa,
            g_m: (cooperativity * gamma_m * kappa / 4.0).sqrt(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quality.is_finite() && self.quality > 0.0) {
            return Err(Error::InvalidParameter {
                field: "quality",
                reason: format!("must be > 0, got {}", self.quality),
            });
        }
        if !(self.cooperativity.is_finite() && self.cooperativity > 0.0) {
            return Err(Error::InvalidParameter {
                field: "cooperativity",
                reason: format!("must be > 0, got {}", self.cooperativity),
            });
        }
        if !(self.n_th.is_finite() && self.n_th >= 0.0) {
            return Err(Error::InvalidParameter { field: "n_th", reason: format!("must be >= 0, got {}", self.n_th) });
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "delta",
                reason: format!("must be >= 0, got {}", self.delta),
            });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter {
                field: "eta",
                reason: format!("must lie in [0, 1], got {}", self.eta),
            });
        }
        if !(self.n_th_optical.is_finite() && self.n_th_optical >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "n_th_optical",
                reason: format!("must be >= 0, got {}", self.n_th_optical),
            });
        }
        Ok(())
    }

    /// Quantum cooperativity C / n_th.
    pub fn quantum_cooperativity(&self) -> f64 {
        self.cooperativity / self.n_th
    }

    /// Measurement-noise intensity 2 eta N_th + 1.
    pub fn measurement_noise(&self) -> f64 {
        2.0 * self.eta * self.n_th_optical + 1.0
    }
}

/// Effective mechanical frequency including the optical spring,
/// `sqrt(Omega^2 + 16 Omega Delta g^2 / (kappa^2 + 4 Delta^2))`.
pub fn effective_frequency(omega: f64, g: f64, kappa: f64, detuning: f64) -> Result<f64> {
    let radicand = omega * omega + 16.0 * omega * detuning * g * g / (kappa * kappa + 4.0 * detuning * detuning);
    if !(radicand > 0.0) {
        return Err(Error::NonPositiveFrequency { radicand });
    }
    Ok(radicand.sqrt())
}

/// Maps the laboratory parameters onto one mode.
pub fn mode_quantities(params: &PhysicalParams, label: ModeLabel) -> Result<ModeSpec> {
    params.validate()?;
    let kappa = match label {
        ModeLabel::Common => params.kappa_plus(),
        ModeLabel::Differential | ModeLabel::Single => params.kappa_minus,
    };
    let detuning = params.detuning();
    let omega_m = effective_frequency(params.omega, params.coupling, kappa, detuning)?;
    let g_m = params.coupling * (params.omega / omega_m).sqrt();
    let thermal = K_B * params.temperature * params.gamma_bare / (HBAR * params.gamma_m * omega_m);
    let n_th = match params.damping {
        DampingModel::Structural => thermal * params.omega / omega_m,
        DampingModel::Velocity => thermal,
    };
    let spec = ModeSpec {
        label,
        quality: omega_m / params.gamma_m,
        cooperativity: 4.0 * g_m * g_m / (params.gamma_m * kappa),
        n_th,
        delta: detuning / kappa,
        eta: params.eta,
        n_th_optical: params.n_th_optical,
        omega_m,
        gamma_m: params.gamma_m,
        kappa,
        g_m,
    };
    spec.validate()?;
    Ok(spec)
}

/// Common and differential modes, in that order.
pub fn mode_pair(params: &PhysicalParams) -> Result<(ModeSpec, ModeSpec)> {
    Ok((mode_quantities(params, ModeLabel::Common)?, mode_quantities(params, ModeLabel::Differential)?))
}

/// Common-mode `(Q+, C+)` from the differential `(Q-, C-)` through the
/// closed spring-stiffening relation.
///
/// This is an independent route to the values produced by
/// [`mode_quantities`] with [`ModeLabel::Common`].
pub fn common_from_differential(q_minus: f64, c_minus: f64, delta_minus: f64, zeta: f64) -> (f64, f64) {
    let d2 = delta_minus * delta_minus;
    let s2 = 1.0
        + 4.0 * c_minus * delta_minus * (zeta * zeta - 1.0)
            / (q_minus * (1.0 + 4.0 * d2) * (1.0 + 4.0 * zeta * zeta * d2));
    let s = s2.sqrt();
    (q_minus * s, zeta * c_minus / s)
}

/// Decay-rate ratio produced by a power-recycling mirror of power reflectivity `r`.
pub fn zeta_from_reflectivity(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain { value: r, reason: "reflectivity must lie in [0, 1)" });
    }
    let amp = r.sqrt();
    Ok((1.0 + amp) / (1.0 - amp))
}

/// Optomechanical coupling `|a| (omega_c / l) sqrt(hbar / 2 m Omega)` with omega_c = omega_L.
pub fn coupling_from_cavity(length: f64, omega_laser: f64, mass: f64, omega: f64, amplitude: f64) -> Result<f64> {
    for (field, v) in [("length", length), ("omega_laser", omega_laser), ("mass", mass), ("omega", omega)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter { field, reason: format!("must be > 0, got {v}") });
        }
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidParameter { field: "amplitude", reason: format!("must be >= 0, got {amplitude}") });
    }
    Ok(amplitude * (omega_laser / length) * (HBAR / (2.0 * mass * omega)).sqrt())
}

/// Kalman-filter coefficients in units of gamma_m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    /// Measurement rate lambda / gamma_m.
    pub measurement_rate: f64,
    /// Process/measurement cross-correlation Lambda / gamma_m.
    pub cross_correlation: f64,
    /// Total force-noise intensity nbar / gamma_m.
    pub force_noise: f64,
    /// Force noise left after removing the part correlated with the
    /// measurement noise, `nbar' - Lambda'^2 / lambda'`.
    pub residual_noise: f64,
    /// Conditional decay gamma_I / gamma_m.
    pub conditional_decay: f64,
    /// `gamma_I / gamma_m - 1`, evaluated without cancellation.
    pub conditional_excess: f64,
}

/// Filter coefficients of `mode` measured in `channel`.
pub fn filter_coefficients(mode: &ModeSpec, channel: MeasurementChannel) -> Result<FilterCoefficients> {
    let ModeSpec { quality, cooperativity, n_th, delta, eta, n_th_optical, .. } = *mode;
    let d2 = delta * delta;
    let u = 1.0 + 4.0 * d2;
    let m = mode.measurement_noise();
    let optical = 2.0 * n_th_optical + 1.0;

    let (lambda, cross, residual_factor) = match channel {
        MeasurementChannel::AmplitudeX => (
            16.0 * cooperativity * d2 * eta / (m * u * u),
            -8.0 * cooperativity * delta * eta * optical / (u * u * m),
            (8.0 * d2 * eta * n_th_optical + u - eta) / (u * m),
        ),
        MeasurementChannel::PhaseY => (
            4.0 * cooperativity * eta / (m * u * u),
            8.0 * cooperativity * delta * eta * optical / (u * u * m),
            (2.0 * eta * n_th_optical + 1.0 + 4.0 * d2 * (1.0 - eta)) / (u * m),
        ),
    };
    let thermal = 4.0 * n_th + 2.0;
    let backaction = 4.0 * cooperativity * optical / u;
    let force_noise = thermal + backaction;
    let residual_noise = thermal + backaction * residual_factor;

    let a = cross / quality;
    let inner = 1.0 + 2.0 * a + force_noise * lambda / (quality * quality);
    if inner < 0.0 {
        return Err(Error::ConditionalInstability { radicand: inner });
    }
    let s = inner.sqrt();
    // gamma'^2 - 1 = -2 Q^2 (1 + a - s); rationalised when 1 + a > 0 so the
    // small-measurement limit keeps full precision.
    let excess_sq = if 1.0 + a > 0.0 {
        2.0 * lambda * residual_noise / (1.0 + a + s)
    } else {
        -2.0 * quality * quality * (1.0 + a - s)
    };
    let outer = 1.0 + excess_sq;
    if outer < 0.0 {
        return Err(Error::ConditionalInstability { radicand: outer });
    }
    let conditional_decay = outer.sqrt();
    Ok(FilterCoefficients {
        measurement_rate: lambda,
        cross_correlation: cross,
        force_noise,
        residual_noise,
        conditional_decay,
        conditional_excess: excess_sq / (conditional_decay + 1.0),
    })
}
