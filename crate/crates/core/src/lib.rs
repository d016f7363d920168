//! Conditional entanglement of two mirrors in a cavity under continuous
//! measurement and Kalman filtering.
//!
//! The pipeline maps physical parameters to common/differential modes
//! ([`model`]), solves the conditional covariance of each mode ([`riccati`]),
//! recombines them into a two-mirror Gaussian state ([`gaussian`]), and scans
//! parameter space ([`sweep`]). [`montecarlo`] cross-checks the filter with
//! stochastic trajectories.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian;
pub mod model;
pub mod montecarlo;
pub mod riccati;
pub mod sweep;

pub use error::{Error, Result};
pub use gaussian::{Cov4, EntanglementReport, Normalization, WignerEllipse};
pub use model::{DampingModel, FilterCoefficients, MeasurementChannel, ModeLabel, ModeSpec, PhysicalParams};
pub use riccati::{Cov2, SystemMatrices};
