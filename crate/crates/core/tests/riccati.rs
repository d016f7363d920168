mod common;

use common::{channel_strategy, min_eigenvalue, params_strategy, relative_frobenius};
use optoent::model::{filter_coefficients, mode_pair};
use optoent::riccati::{
    conditional_steady_state, integrate_riccati, lyapunov_steady_state, riccati_rhs, steady_state_analytic,
    steady_state_residuals, IntegrationOptions,
};
use optoent::{Cov2, MeasurementChannel, ModeSpec, PhysicalParams, SystemMatrices};
use proptest::prelude::*;

fn modes(params: &PhysicalParams) -> Option<[ModeSpec; 2]> {
    mode_pair(params).ok().map(|(p, m)| [p, m])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_state_solves_the_matrix_equation(params in params_strategy(), channel in channel_strategy()) {
        let Some(pair) = modes(&params) else { return Ok(()) };
        for mode in pair {
            let coef = filter_coefficients(&mode, channel).unwrap();
            let v = steady_state_analytic(&coef, mode.quality).unwrap();
            let scale = coef.force_noise;
            for r in steady_state_residuals(&v, &coef, mode.quality) {
                prop_assert!(r.abs() <= 1e-9 * scale, "residual {r} vs nbar {scale}");
            }
            // the scalar equations against the general matrix form
            let rhs = riccati_rhs(&v, &SystemMatrices::for_mode(&mode, channel));
            prop_assert!(rhs.norm() <= 1e-9 * scale, "matrix residual {}", rhs.norm());
            prop_assert!(v.det() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn conditioning_never_adds_uncertainty(params in params_strategy(), channel in channel_strategy()) {
        let Some(pair) = modes(&params) else { return Ok(()) };
        for mode in pair {
            let coef = filter_coefficients(&mode, channel).unwrap();
            let cond = conditional_steady_state(&mode, &coef).unwrap();
            let free = lyapunov_steady_state(&SystemMatrices::for_mode(&mode, channel)).unwrap();
            let diff = Cov2::new(free.v11 - cond.v11, free.v12 - cond.v12, free.v22 - cond.v22);
            prop_assert!(min_eigenvalue(&diff) >= -1e-9 * free.frobenius_norm());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn thermal_start_converges_to_the_fixed_point(params in params_strategy(), channel in channel_strategy()) {
        let Some(pair) = modes(&params) else { return Ok(()) };
        let minus = pair[1];
        let coef = filter_coefficients(&minus, channel).unwrap();
        prop_assume!(coef.measurement_rate > 1e-6);
        let target = steady_state_analytic(&coef, minus.quality).unwrap();
        let sys = SystemMatrices::for_mode(&minus, channel);
        let t_end = 50.0 / (coef.conditional_decay - 1.0).max(1e-3);
        let run = integrate_riccati(Cov2::thermal(minus.n_th), &sys, t_end, IntegrationOptions::default()).unwrap();
        prop_assert!(relative_frobenius(&run.final_state(), &target) <= 1e-6);
    }
}

#[test]
fn reference_differential_mode() {
    let (_, minus) = mode_pair(&PhysicalParams::reference_setup()).unwrap();
    let coef = filter_coefficients(&minus, MeasurementChannel::AmplitudeX).unwrap();
    let v = steady_state_analytic(&coef, minus.quality).unwrap();
    let free = lyapunov_steady_state(&SystemMatrices::for_mode(&minus, MeasurementChannel::AmplitudeX)).unwrap();
    assert!(free.v11 > v.v11 && free.v22 > v.v22);
    let sys = SystemMatrices::for_mode(&minus, MeasurementChannel::AmplitudeX);
    let run = integrate_riccati(Cov2::thermal(minus.n_th), &sys, 1.0, IntegrationOptions::default()).unwrap();
    assert!(run.stationary);
    assert!(relative_frobenius(&run.final_state(), &v) <= 1e-6);
}

#[test]
fn lossless_detection_of_vacuum_light_reduces_to_lyapunov() {
    // With eta = 0 nothing is learned and the conditional covariance is the
    // free one.
    let mode = ModeSpec::dimensionless(30.0, 200.0, 4.0, 0.25, 0.0, 0.0).unwrap();
    for channel in [MeasurementChannel::AmplitudeX, MeasurementChannel::PhaseY] {
        let coef = filter_coefficients(&mode, channel).unwrap();
        assert_eq!(coef.measurement_rate, 0.0);
        let cond = conditional_steady_state(&mode, &coef).unwrap();
        let free = lyapunov_steady_state(&SystemMatrices::for_mode(&mode, channel)).unwrap();
        assert!(relative_frobenius(&cond, &free) < 1e-12, "{cond:?} vs {free:?}");
    }
}

#[test]
fn weak_measurement_tracks_a_fine_step_integration() {
    // Large Q with a weak measurement: the analytic state must agree with a
    // direct integration, which checks the rationalised small-rate branch.
    let mode = ModeSpec::dimensionless(100.0, 0.05, 10.0, 0.3, 0.9, 0.0).unwrap();
    let channel = MeasurementChannel::AmplitudeX;
    let coef = filter_coefficients(&mode, channel).unwrap();
    let target = steady_state_analytic(&coef, mode.quality).unwrap();
    let sys = SystemMatrices::for_mode(&mode, channel);
    let t_end = 60.0 / (coef.conditional_decay - 1.0);
    let run = integrate_riccati(Cov2::thermal(mode.n_th), &sys, t_end, IntegrationOptions::default()).unwrap();
    assert!(relative_frobenius(&run.final_state(), &target) < 1e-6);
}
