mod common;

use common::{gaussian_state, oracle_epsilon, params_strategy, state_strategy};
use nalgebra::Matrix2;
use optoent::gaussian::{
    combine_modes, combine_modes_normalized, dimensional_covariance, entanglement_from_matrix, epsilon_cr_closed_form,
    purity, squeeze_eigenvalues, squeezing_angle, wigner_ellipse,
};
use optoent::model::{filter_coefficients, mode_pair, HBAR};
use optoent::riccati::conditional_steady_state;
use optoent::{Cov2, MeasurementChannel, PhysicalParams};
use proptest::prelude::*;

fn both_paths(params: &PhysicalParams, channel: MeasurementChannel) -> Option<(f64, f64)> {
    let (plus, minus) = mode_pair(params).ok()?;
    let fp = filter_coefficients(&plus, channel).ok()?;
    let fm = filter_coefficients(&minus, channel).ok()?;
    let closed = epsilon_cr_closed_form(&fp, &fm, plus.quality, minus.quality).ok()?;
    let vp = conditional_steady_state(&plus, &fp).unwrap();
    let vm = conditional_steady_state(&minus, &fm).unwrap();
    let cov = combine_modes_normalized(&vp, &vm, plus.omega_m, minus.omega_m, minus.omega_m);
    Some((closed, entanglement_from_matrix(&cov).unwrap().epsilon_cr))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn closed_form_matches_matrix_path(params in params_strategy()) {
        for channel in [MeasurementChannel::AmplitudeX, MeasurementChannel::PhaseY] {
            if let Some((closed, matrix)) = both_paths(&params, channel) {
                prop_assert!((closed - matrix).abs() <= 1e-9, "{closed} vs {matrix}");
            }
        }
    }

    #[test]
    fn matrix_path_matches_symplectic_spectrum(
        plus in state_strategy(),
        minus in state_strategy(),
        ratio in 0.2f64..5.0,
    ) {
        let cov = combine_modes_normalized(&plus, &minus, ratio, 1.0, 1.0);
        let report = entanglement_from_matrix(&cov).unwrap();
        let oracle = oracle_epsilon(&cov.matrix);
        prop_assert!((report.epsilon_cr - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()), "{} vs {oracle}", report.epsilon_cr);
        prop_assert_eq!(report.log_negativity, report.epsilon_cr.max(0.0));
        prop_assert!(cov.is_physical());
    }

    #[test]
    fn entanglement_is_independent_of_units(
        plus in state_strategy(),
        minus in state_strategy(),
        omega_plus in 1.0f64..1e4,
        omega_minus in 1.0f64..1e4,
    ) {
        let mass = 7.71e-6;
        let si = entanglement_from_matrix(&combine_modes(&plus, &minus, omega_plus, omega_minus, mass)).unwrap();
        for omega_ref in [omega_plus, omega_minus, 0.5 * (omega_plus + omega_minus)] {
            let vac = entanglement_from_matrix(&combine_modes_normalized(&plus, &minus, omega_plus, omega_minus, omega_ref)).unwrap();
            prop_assert!((si.epsilon_cr - vac.epsilon_cr).abs() <= 1e-10 * (1.0 + si.epsilon_cr.abs()));
        }
    }

    #[test]
    fn identical_modes_are_never_entangled(v in state_strategy()) {
        let cov = combine_modes_normalized(&v, &v, 1.0, 1.0, 1.0);
        let report = entanglement_from_matrix(&cov).unwrap();
        prop_assert!(report.epsilon_cr <= 1e-9);
        prop_assert_eq!(report.log_negativity, report.epsilon_cr.max(0.0));
    }

    #[test]
    fn physical_states_respect_the_vacuum_bound(v in state_strategy()) {
        prop_assert!(v.det() >= 1.0 - 1e-9);
        let p = purity(&v).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
        let (e_min, e_max) = squeeze_eigenvalues(&v);
        prop_assert!((e_min * e_max - v.det()).abs() <= 1e-9 * v.det());
    }

    #[test]
    fn rotation_by_the_squeezing_angle_diagonalizes(n in 0.0f64..10.0, r in 0.05f64..2.0, phi in 0.0f64..std::f64::consts::PI) {
        let v = gaussian_state(n, r, phi);
        let theta = squeezing_angle(&v).unwrap();
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&theta));
        let minor = -v.v12.signum() * theta;
        let (s, c) = minor.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let d = rot.transpose() * v.to_matrix() * rot;
        let (e_min, _) = squeeze_eigenvalues(&v);
        prop_assert!(d[(0, 1)].abs() <= 1e-9 * d.norm());
        prop_assert!((d[(0, 0)] - e_min).abs() <= 1e-9 * d.norm());
    }

    #[test]
    fn dimensional_determinant_scales_by_hbar(v in state_strategy(), omega in 1.0f64..1e4) {
        let m = dimensional_covariance(&v, omega, 7.71e-6);
        let expected = (HBAR / 2.0).powi(2) * v.det();
        prop_assert!((m.determinant() / expected - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn two_mode_squeezed_state() {
    let e = std::f64::consts::E;
    let cov = combine_modes_normalized(&Cov2::new(1.0 / e, 0.0, e), &Cov2::new(e, 0.0, 1.0 / e), 1.0, 1.0, 1.0);
    let report = entanglement_from_matrix(&cov).unwrap();
    assert!((report.log_negativity - std::f64::consts::LOG2_E).abs() < 1e-12);
    assert!((report.nu_tilde - 1.0 / e).abs() < 1e-12);
}

#[test]
fn reference_point_paths_agree() {
    let (closed, matrix) = both_paths(&PhysicalParams::reference_setup(), MeasurementChannel::AmplitudeX).unwrap();
    assert!(closed > 0.0);
    assert!((closed - matrix).abs() <= 1e-9);
}

#[test]
fn entanglement_fades_as_the_measurement_weakens() {
    let mut params = PhysicalParams::reference_setup();
    let mut previous = f64::INFINITY;
    for k in 0..12 {
        params.eta = 0.92 * 0.3f64.powi(k);
        let (closed, _) = both_paths(&params, MeasurementChannel::AmplitudeX).unwrap();
        assert!(closed < previous, "eta = {}: {closed} after {previous}", params.eta);
        previous = closed;
    }
    assert!(previous < -5.0);
}

#[test]
fn mean_frequency_units_rotate_the_common_mode() {
    let params = PhysicalParams::reference_setup();
    let (plus, minus) = mode_pair(&params).unwrap();
    let coef = filter_coefficients(&plus, MeasurementChannel::AmplitudeX).unwrap();
    let v = conditional_steady_state(&plus, &coef).unwrap();
    let mean = 0.5 * (plus.omega_m + minus.omega_m);
    let (own, _) = wigner_ellipse(&v, plus.omega_m, plus.omega_m, 8).unwrap();
    let (shared, _) = wigner_ellipse(&v, plus.omega_m, mean, 8).unwrap();
    assert!((own.angle - shared.angle).abs() > 1e-3, "{} vs {}", own.angle, shared.angle);
    // areas are unit-independent
    assert!((own.semi_major * own.semi_minor - shared.semi_major * shared.semi_minor).abs() < 1e-9 * own.semi_major);
}
