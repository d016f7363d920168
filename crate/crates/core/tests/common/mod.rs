#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Matrix4};
use optoent::{Cov2, MeasurementChannel, PhysicalParams};
use proptest::prelude::*;
use rand::Rng;

/// Laboratory parameters drawn around the reference setup over the region
/// the figures cover: Gamma log-uniform over six decades, detuning, recycling
/// factor, efficiency, temperature, and coupling.
pub fn params_strategy() -> impl Strategy<Value = PhysicalParams> {
    (-9.0f64..-3.0, 0.02f64..1.0, 1.0f64..30.0, 0.3f64..=1.0, 0.0f64..2.5, 0.5f64..2.0, 0.0f64..0.3).prop_map(
        |(log_gamma, delta, zeta, eta, log_temp, coupling_scale, optical)| {
            perturbed(log_gamma, delta, zeta, eta, log_temp, coupling_scale, optical)
        },
    )
}

pub fn random_params(rng: &mut impl Rng) -> PhysicalParams {
    perturbed(
        rng.random_range(-9.0..-3.0),
        rng.random_range(0.02..1.0),
        rng.random_range(1.0..30.0),
        rng.random_range(0.3..=1.0),
        rng.random_range(0.0..2.5),
        rng.random_range(0.5..2.0),
        if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.3) },
    )
}

fn perturbed(
    log_gamma: f64,
    delta: f64,
    zeta: f64,
    eta: f64,
    log_temp: f64,
    coupling_scale: f64,
    optical: f64,
) -> PhysicalParams {
    let mut p = PhysicalParams::reference_setup();
    p.gamma_m = TAU * 10f64.powf(log_gamma);
    p.delta_minus = delta;
    p.zeta = zeta;
    p.eta = eta;
    p.temperature = 10f64.powf(log_temp);
    p.coupling *= coupling_scale;
    p.n_th_optical = optical;
    p
}

pub fn channel_strategy() -> impl Strategy<Value = MeasurementChannel> {
    prop_oneof![Just(MeasurementChannel::AmplitudeX), Just(MeasurementChannel::PhaseY)]
}

/// A pure squeezed state scaled by a thermal factor: `(2n+1) R S R^T`.
pub fn gaussian_state(n: f64, squeeze: f64, rotation: f64) -> Cov2 {
    let (s, c) = rotation.sin_cos();
    let r = Matrix2::new(c, -s, s, c);
    let d = Matrix2::new((-2.0 * squeeze).exp(), 0.0, 0.0, (2.0 * squeeze).exp());
    Cov2::from_matrix(&(r * d * r.transpose() * (2.0 * n + 1.0)))
}

pub fn state_strategy() -> impl Strategy<Value = Cov2> {
    (0.0f64..20.0, -2.0f64..2.0, 0.0f64..TAU).prop_map(|(n, r, phi)| gaussian_state(n, r, phi))
}

/// Smallest symplectic eigenvalue of the partial transpose, from the
/// spectrum of `-(Omega V~)^2` (each `nu^2` appears twice).
pub fn partial_transpose_nu(v: &Matrix4<f64>) -> f64 {
    let flip = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
    let vt = flip * v * flip;
    let omega = Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    );
    let m = omega * vt;
    let sq = -(m * m);
    sq.complex_eigenvalues().iter().map(|z| z.re).fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

/// Exponent `-log2 nu~` from the oracle above.
pub fn oracle_epsilon(v: &Matrix4<f64>) -> f64 {
    -partial_transpose_nu(v).log2()
}

pub fn relative_frobenius(a: &Cov2, b: &Cov2) -> f64 {
    a.frobenius_distance(b) / b.frobenius_norm()
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(v: &Cov2) -> f64 {
    let mean = 0.5 * (v.v11 + v.v22);
    let half = 0.5 * (v.v11 - v.v22);
    mean - half.hypot(v.v12)
}
