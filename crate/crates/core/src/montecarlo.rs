//! Stochastic-trajectory check of the steady-state filter.
//!
//! Each trajectory propagates a true mechanical state driven by thermal and
//! back-action noise together with a Kalman estimate fed by the simulated
//! photocurrent. The time-averaged second moment of the estimation error
//! should reproduce the analytic conditional covariance.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{filter_coefficients, MeasurementChannel, ModeSpec};
use crate::riccati::{conditional_steady_state, kalman_gain, Cov2, SystemMatrices};

/// Generator identifier recorded in every result.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = trajectory index";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub n_traj: usize,
    /// Step in normalised time.
    pub dt: f64,
    pub t_burn: f64,
    pub t_collect: f64,
    pub seed: u64,
    pub mode: ModeSpec,
    pub channel: MeasurementChannel,
}

impl TrajectoryConfig {
    /// Config with step `0.002 / max(Q, gamma')`, a burn-in of 20
    /// relaxation times, and a window of `collect_relaxations` relaxation times.
    pub fn with_defaults(
        mode: ModeSpec,
        channel: MeasurementChannel,
        n_traj: usize,
        collect_relaxations: f64,
        seed: u64,
    ) -> Result<Self> {
        let coef = filter_coefficients(&mode, channel)?;
        let rate = relaxation_rate(coef.conditional_excess);
        Ok(TrajectoryConfig {
            n_traj,
            dt: 0.002 / mode.quality.max(coef.conditional_decay),
            t_burn: 20.0 / rate,
            t_collect: collect_relaxations / rate,
            seed,
            mode,
            channel,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        let coef = filter_coefficients(&self.mode, self.channel)?;
        let max_dt = 0.01 / self.mode.quality.max(coef.conditional_decay);
        if !(self.dt > 0.0 && self.dt <= max_dt) {
            return Err(Error::InvalidParameter {
                field: "dt",
                reason: format!("must lie in (0, {max_dt:e}], got {}", self.dt),
            });
        }
        let min_burn = 10.0 / relaxation_rate(coef.conditional_excess);
        if !(self.t_burn >= min_burn) {
            return Err(Error::InvalidParameter {
                field: "t_burn",
                reason: format!("must be >= {min_burn:e}, got {}", self.t_burn),
            });
        }
        if !(self.t_collect > 0.0) {
            return Err(Error::InvalidParameter { field: "t_collect", reason: "must be positive".into() });
        }
        if self.n_traj < 100 {
            return Err(Error::InvalidParameter {
                field: "n_traj",
                reason: format!("must be >= 100, got {}", self.n_traj),
            });
        }
        Ok(())
    }
}

/// Relaxation rate of the error covariance; without measurement the
/// mechanical damping (1 in normalised units) sets the scale.
fn relaxation_rate(conditional_excess: f64) -> f64 {
    conditional_excess.max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    /// Ensemble- and time-averaged second moment of `r - r_est`.
    pub covariance: Cov2,
    /// Standard error of each entry across trajectories.
    pub standard_error: Cov2,
    /// Covariance the filter was designed for.
    pub analytic: Cov2,
    pub n_traj: usize,
    pub steps_per_trajectory: usize,
    pub seed: u64,
    pub rng: &'static str,
}

impl MonteCarloResult {
    /// Largest entrywise relative deviation from the analytic covariance,
    /// measured against the largest analytic entry so a vanishing
    /// off-diagonal does not blow up the ratio.
    pub fn max_relative_error(&self) -> f64 {
        let scale = self.analytic.v11.abs().max(self.analytic.v12.abs()).max(self.analytic.v22.abs());
        self.entrywise(|emp, ana, _| (emp - ana).abs() / ana.abs().max(1e-2 * scale))
    }

    /// Largest entrywise deviation in units of standard errors.
    pub fn max_standard_errors(&self) -> f64 {
        self.entrywise(|emp, ana, se| {
            if se > 0.0 {
                (emp - ana).abs() / se
            } else if emp == ana {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }

    fn entrywise(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let (e, a, s) = (&self.covariance, &self.analytic, &self.standard_error);
        f(e.v11, a.v11, s.v11).max(f(e.v12, a.v12, s.v12)).max(f(e.v22, a.v22, s.v22))
    }
}

/// Lower-triangular factor of the joint (process, measurement) noise
/// intensity `[[nbar, L2], [L2, M]]`, allowing a semidefinite matrix.
fn noise_factor(nbar: f64, cross: f64, meas: f64) -> Result<Matrix2<f64>> {
    let det = nbar * meas - cross * cross;
    let scale = (nbar * meas).abs().max(cross * cross);
    if nbar < 0.0 || meas < 0.0 || det < -1e-12 * scale {
        return Err(Error::IllConditionedNoise);
    }
    let l11 = nbar.sqrt();
    let l21 = if l11 > 0.0 {
        cross / l11
    } else if cross == 0.0 {
        0.0
    } else {
        return Err(Error::IllConditionedNoise);
    };
    let l22 = (meas - l21 * l21).max(0.0).sqrt();
    Ok(Matrix2::new(l11, 0.0, l21, l22))
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

struct Propagator {
    drift: Matrix2<f64>,
    observation: f64,
    gain: Vector2<f64>,
    factor: Matrix2<f64>,
    dt: f64,
    burn_steps: usize,
    collect_steps: usize,
}

impl Propagator {
    /// Time-averaged `(e1^2, e1 e2, e2^2)` of one trajectory.
    fn run(&self, seed: u64, index: u64) -> [f64; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let sqrt_dt = self.dt.sqrt();
        let mut state = Vector2::zeros();
        let mut estimate = Vector2::zeros();
        let mut acc = [Compensated::default(); 3];
        for step in 0..self.burn_steps + self.collect_steps {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let force = self.factor[(0, 0)] * z1 * sqrt_dt;
            let meas_noise = (self.factor[(1, 0)] * z1 + self.factor[(1, 1)] * z2) * sqrt_dt;
            let record = self.observation * state[0] * self.dt + meas_noise;
            let innovation = record - self.observation * estimate[0] * self.dt;
            state += self.drift * state * self.dt + Vector2::new(0.0, force);
            estimate += self.drift * estimate * self.dt + self.gain * innovation;
            if step >= self.burn_steps {
                let e = state - estimate;
                acc[0].add(e[0] * e[0]);
                acc[1].add(e[0] * e[1]);
                acc[2].add(e[1] * e[1]);
            }
        }
        let n = self.collect_steps as f64;
        acc.map(|a| a.value() / n)
    }
}

/// Empirical estimation-error covariance of an ensemble of filtered
/// trajectories, with the fixed steady-state gain.
///
/// Trajectories run in parallel; per-trajectory averages are reduced in
/// index order, so the result is bit-identical for any thread count.
pub fn simulate_ensemble(config: &TrajectoryConfig) -> Result<MonteCarloResult> {
    config.validate()?;
    let coef = filter_coefficients(&config.mode, config.channel)?;
    let analytic = conditional_steady_state(&config.mode, &coef)?;
    let sys = SystemMatrices::for_mode(&config.mode, config.channel);
    let factor = noise_factor(sys.force_noise(), sys.cross[1], sys.meas_noise)?;
    let prop = Propagator {
        drift: sys.drift,
        observation: sys.observation[0],
        gain: kalman_gain(&analytic, &sys),
        factor,
        dt: config.dt,
        burn_steps: (config.t_burn / config.dt).ceil() as usize,
        collect_steps: ((config.t_collect / config.dt).ceil() as usize).max(1),
    };

    let per_traj: Vec<[f64; 3]> = (0..config.n_traj as u64).into_par_iter().map(|i| prop.run(config.seed, i)).collect();

    let n = per_traj.len() as f64;
    let mut mean = [0.0; 3];
    let mut se = [0.0; 3];
    for k in 0..3 {
        let mut s = Compensated::default();
        per_traj.iter().for_each(|t| s.add(t[k]));
        mean[k] = s.value() / n;
        let mut ss = Compensated::default();
        per_traj.iter().for_each(|t| ss.add((t[k] - mean[k]).powi(2)));
        se[k] = (ss.value() / (n - 1.0)).sqrt() / n.sqrt();
    }
    Ok(MonteCarloResult {
        covariance: Cov2::new(mean[0], mean[1], mean[2]),
        standard_error: Cov2::new(se[0], se[1], se[2]),
        analytic,
        n_traj: config.n_traj,
        steps_per_trajectory: prop.burn_steps + prop.collect_steps,
        seed: config.seed,
        rng: RNG_ALGORITHM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_intensity() {
        let f = noise_factor(5.0, 1.5, 2.0).unwrap();
        let back = f * f.transpose();
        assert!((back - Matrix2::new(5.0, 1.5, 1.5, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn cauchy_schwarz_violation_is_rejected() {
        assert_eq!(noise_factor(1.0, 2.0, 1.0), Err(Error::IllConditionedNoise));
        assert_eq!(noise_factor(0.0, 0.1, 1.0), Err(Error::IllConditionedNoise));
        assert!(noise_factor(0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let mut s = Compensated::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn noiseless_error_stays_zero() {
        let prop = Propagator {
            drift: Matrix2::new(0.0, 3.0, -3.0, -1.0),
            observation: 0.7,
            gain: Vector2::new(0.4, 0.1),
            factor: Matrix2::zeros(),
            dt: 1e-3,
            burn_steps: 10,
            collect_steps: 1000,
        };
        assert_eq!(prop.run(7, 0), [0.0; 3]);
    }

    #[test]
    fn config_invariants() {
        let mode = ModeSpec::dimensionless(5.0, 2.0, 1.0, 0.3, 0.9, 0.0).unwrap();
        let ok = TrajectoryConfig::with_defaults(mode, MeasurementChannel::PhaseY, 100, 10.0, 1).unwrap();
        assert!(ok.validate().is_ok());
        assert!(TrajectoryConfig { dt: 1.0, ..ok }.validate().is_err());
        assert!(TrajectoryConfig { t_burn: 0.0, ..ok }.validate().is_err());
        assert!(TrajectoryConfig { n_traj: 99, ..ok }.validate().is_err());
    }
}
