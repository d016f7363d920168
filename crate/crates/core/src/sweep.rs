//! Parameter grids, per-point evaluation of the full pipeline, figure
//! presets, and threshold extraction.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    combine_modes_normalized, entanglement_from_matrix, purity, squeeze_eigenvalues, squeezing_angle,
    EntanglementReport,
};
use crate::model::{
    filter_coefficients, hz, mode_pair, FilterCoefficients, MeasurementChannel, ModeSpec, PhysicalParams,
};
use crate::riccati::{conditional_steady_state, lyapunov_steady_state, Cov2, SystemMatrices};

/// Everything the pipeline produces for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub plus: ModeSpec,
    pub minus: ModeSpec,
    pub filter_plus: FilterCoefficients,
    pub filter_minus: FilterCoefficients,
    /// Conditional covariances, each normalised at its own frequency.
    pub v_plus: Cov2,
    pub v_minus: Cov2,
    /// Unconditional (Lyapunov) covariances.
    pub lyapunov_plus: Cov2,
    pub lyapunov_minus: Cov2,
    pub entanglement: EntanglementReport,
    pub e_min_plus: f64,
    pub e_min_minus: f64,
    pub purity_plus: f64,
    pub purity_minus: f64,
    /// `None` when a covariance is isotropic and the angle is undefined.
    pub angle_plus: Option<f64>,
    pub angle_minus: Option<f64>,
    pub cq_minus: f64,
}

impl PointReport {
    pub fn angle_diff(&self) -> Result<f64> {
        match (self.angle_plus, self.angle_minus) {
            (Some(a), Some(b)) => Ok((a - b).abs()),
            _ => Err(Error::DegenerateEllipse),
        }
    }

    pub fn field(&self, field: OutputField) -> Result<f64> {
        Ok(match field {
            OutputField::EpsilonCr => self.entanglement.epsilon_cr,
            OutputField::LogNegativity => self.entanglement.log_negativity,
            OutputField::EMinPlus => self.e_min_plus,
            OutputField::EMinMinus => self.e_min_minus,
            OutputField::PurityPlus => self.purity_plus,
            OutputField::PurityMinus => self.purity_minus,
            OutputField::AngleDiff => return self.angle_diff(),
            OutputField::OmegaPlus => self.plus.omega_m,
            OutputField::OmegaMinus => self.minus.omega_m,
            OutputField::CqMinus => self.cq_minus,
        })
    }
}

/// Runs the full pipeline at one parameter set.
pub fn evaluate_point(params: &PhysicalParams, channel: MeasurementChannel) -> Result<PointReport> {
    let (plus, minus) = mode_pair(params)?;
    let filter_plus = filter_coefficients(&plus, channel)?;
    let filter_minus = filter_coefficients(&minus, channel)?;
    let v_plus = conditional_steady_state(&plus, &filter_plus)?;
    let v_minus = conditional_steady_state(&minus, &filter_minus)?;
    let lyapunov_plus = lyapunov_steady_state(&SystemMatrices::for_mode(&plus, channel))?;
    let lyapunov_minus = lyapunov_steady_state(&SystemMatrices::for_mode(&minus, channel))?;
    let two_mode = combine_modes_normalized(&v_plus, &v_minus, plus.omega_m, minus.omega_m, minus.omega_m);
    let entanglement = entanglement_from_matrix(&two_mode)?;
    Ok(PointReport {
        e_min_plus: squeeze_eigenvalues(&v_plus).0,
        e_min_minus: squeeze_eigenvalues(&v_minus).0,
        purity_plus: purity(&v_plus)?,
        purity_minus: purity(&v_minus)?,
        angle_plus: squeezing_angle(&v_plus).ok(),
        angle_minus: squeezing_angle(&v_minus).ok(),
        cq_minus: minus.quantum_cooperativity(),
        plus,
        minus,
        filter_plus,
        filter_minus,
        v_plus,
        v_minus,
        lyapunov_plus,
        lyapunov_minus,
        entanglement,
    })
}

/// Swept physical parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    /// Bare mechanical damping Gamma [rad/s].
    Gamma,
    DeltaMinus,
    Zeta,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::Gamma => "gamma",
            AxisParam::DeltaMinus => "delta_minus",
            AxisParam::Zeta => "zeta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gamma" | "Gamma" => Some(AxisParam::Gamma),
            "delta_minus" | "delta" => Some(AxisParam::DeltaMinus),
            "zeta" => Some(AxisParam::Zeta),
            _ => None,
        }
    }

    pub fn apply(self, params: &mut PhysicalParams, value: f64) {
        match self {
            AxisParam::Gamma => params.gamma_bare = value,
            AxisParam::DeltaMinus => params.delta_minus = value,
            AxisParam::Zeta => params.zeta = value,
        }
    }

    pub fn get(self, params: &PhysicalParams) -> f64 {
        match self {
            AxisParam::Gamma => params.gamma_bare,
            AxisParam::DeltaMinus => params.delta_minus,
            AxisParam::Zeta => params.zeta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// One grid axis. Gamma values are in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: AxisParam,
    pub start: f64,
    pub end: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(param: AxisParam, start: f64, end: f64, points: usize) -> Self {
        Axis { param, start, end, points, spacing: Spacing::Linear }
    }

    pub fn log(param: AxisParam, start: f64, end: f64, points: usize) -> Self {
        Axis { param, start, end, points, spacing: Spacing::Log }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "axis",
                reason: format!("{} range must be finite", self.param.name()),
            });
        }
        if self.points == 0 || (self.points == 1 && self.start != self.end) {
            return Err(Error::InvalidParameter {
                field: "axis",
                reason: format!("{} needs >= 2 points (or 1 point with start == end)", self.param.name()),
            });
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.end > 0.0) {
            return Err(Error::InvalidParameter {
                field: "axis",
                reason: format!("log-spaced {} must be positive", self.param.name()),
            });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + t * (self.end - self.start),
                    Spacing::Log => (self.start.ln() + t * (self.end.ln() - self.start.ln())).exp(),
                }
            })
            .enumerate()
            .map(|(i, v)| match i {
                0 => self.start,
                i if i == self.points - 1 => self.end,
                _ => v.clamp(self.start.min(self.end), self.start.max(self.end)),
            })
            .collect()
    }
}

/// Scalars a sweep can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputField {
    #[serde(rename = "epsilon_cr")]
    EpsilonCr,
    #[serde(rename = "E_N")]
    LogNegativity,
    #[serde(rename = "E_min_plus")]
    EMinPlus,
    #[serde(rename = "E_min_minus")]
    EMinMinus,
    #[serde(rename = "purity_plus")]
    PurityPlus,
    #[serde(rename = "purity_minus")]
    PurityMinus,
    #[serde(rename = "angle_diff")]
    AngleDiff,
    #[serde(rename = "omega_m_plus")]
    OmegaPlus,
    #[serde(rename = "omega_m_minus")]
    OmegaMinus,
    #[serde(rename = "Cq_minus")]
    CqMinus,
}

impl OutputField {
    pub const ALL: [OutputField; 10] = [
        OutputField::EpsilonCr,
        OutputField::LogNegativity,
        OutputField::EMinPlus,
        OutputField::EMinMinus,
        OutputField::PurityPlus,
        OutputField::PurityMinus,
        OutputField::AngleDiff,
        OutputField::OmegaPlus,
        OutputField::OmegaMinus,
        OutputField::CqMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutputField::EpsilonCr => "epsilon_cr",
            OutputField::LogNegativity => "E_N",
            OutputField::EMinPlus => "E_min_plus",
            OutputField::EMinMinus => "E_min_minus",
            OutputField::PurityPlus => "purity_plus",
            OutputField::PurityMinus => "purity_minus",
            OutputField::AngleDiff => "angle_diff",
            OutputField::OmegaPlus => "omega_m_plus",
            OutputField::OmegaMinus => "omega_m_minus",
            OutputField::CqMinus => "Cq_minus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: PhysicalParams,
    pub axes: Vec<Axis>,
    pub channel: MeasurementChannel,
    pub outputs: Vec<OutputField>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidParameter {
                field: "axes",
                reason: format!("need 1 or 2 axes, got {}", self.axes.len()),
            });
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidParameter {
                field: "axes",
                reason: "axes must sweep different parameters".into(),
            });
        }
        if self.outputs.is_empty() {
            return Err(Error::InvalidParameter { field: "outputs", reason: "at least one output is required".into() });
        }
        self.base.validate()?;
        for axis in &self.axes {
            axis.validate()?;
            for end in [axis.start, axis.end] {
                let mut p = self.base;
                axis.param.apply(&mut p, end);
                p.validate()?;
            }
        }
        Ok(())
    }

    /// Parameter set of the cell with row-major flat index `index`.
    pub fn cell_params(&self, axis_values: &[Vec<f64>], index: usize) -> (Vec<f64>, PhysicalParams) {
        let mut params = self.base;
        let mut coords = Vec::with_capacity(self.axes.len());
        let mut rest = index;
        let mut stride: usize = axis_values.iter().map(Vec::len).product();
        for (axis, values) in self.axes.iter().zip(axis_values) {
            stride /= values.len();
            let v = values[rest / stride];
            rest %= stride;
            axis.param.apply(&mut params, v);
            coords.push(v);
        }
        (coords, params)
    }
}

/// Typed reason a cell carries no values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for CellFailure {
    fn from(e: &Error) -> Self {
        CellFailure { kind: e.kind().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Axis values in axis order.
    pub coords: Vec<f64>,
    /// Derived quantum cooperativity of the differential mode, when the
    /// mode itself exists.
    pub cq_minus: Option<f64>,
    /// Requested outputs in `GridResult::outputs` order.
    pub values: std::result::Result<Vec<f64>, CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub axes: Vec<Axis>,
    pub axis_values: Vec<Vec<f64>>,
    pub outputs: Vec<OutputField>,
    /// Row-major: the last axis varies fastest.
    pub cells: Vec<Cell>,
    pub channel: MeasurementChannel,
    pub base: PhysicalParams,
    pub version: String,
}

impl GridResult {
    pub fn shape(&self) -> Vec<usize> {
        self.axis_values.iter().map(Vec::len).collect()
    }

    pub fn output_index(&self, field: OutputField) -> Option<usize> {
        self.outputs.iter().position(|&f| f == field)
    }

    /// Value of `field` in `cell`, `None` for failed cells.
    pub fn value(&self, cell: &Cell, field: OutputField) -> Option<f64> {
        let k = self.output_index(field)?;
        cell.values.as_ref().ok().map(|v| v[k])
    }
}

fn evaluate_cell(spec: &SweepSpec, axis_values: &[Vec<f64>], index: usize) -> Cell {
    let (coords, params) = spec.cell_params(axis_values, index);
    let cq_minus = mode_pair(&params).ok().map(|(_, minus)| minus.quantum_cooperativity());
    let values = evaluate_point(&params, spec.channel)
        .and_then(|report| spec.outputs.iter().map(|&f| report.field(f)).collect::<Result<Vec<_>>>())
        .map_err(|e| CellFailure::from(&e));
    Cell { coords, cq_minus, values }
}

/// Evaluates every cell of the grid. Cells run in parallel on the current
/// rayon pool; output order is row-major regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<GridResult> {
    spec.validate()?;
    let axis_values: Vec<Vec<f64>> = spec.axes.iter().map(Axis::values).collect();
    let total: usize = axis_values.iter().map(Vec::len).product();
    let cells = (0..total).into_par_iter().map(|i| evaluate_cell(spec, &axis_values, i)).collect();
    Ok(GridResult {
        axes: spec.axes.clone(),
        axis_values,
        outputs: spec.outputs.clone(),
        cells,
        channel: spec.channel,
        base: spec.base,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Indices `i` such that `values[i]` and `values[i + 1]` lie on opposite
/// sides of `level` (a value equal to `level` counts as below).
pub fn bracket_crossings(values: &[f64], level: f64) -> Vec<usize> {
    values.windows(2).enumerate().filter(|(_, w)| (w[0] > level) != (w[1] > level)).map(|(i, _)| i).collect()
}

/// Bisects `f - level` between `lo` and `hi` (which must bracket the
/// crossing) until `|hi - lo| <= rel_tol * max(|lo|, |hi|)`. With `log`,
/// midpoints are geometric.
pub fn bisect_crossing(
    f: impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    level: f64,
    rel_tol: f64,
    log: bool,
) -> Result<(f64, f64)> {
    let lo_above = f(lo)? > level;
    while (hi - lo).abs() > rel_tol * lo.abs().max(hi.abs()) {
        let mid = if log { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if (f(mid)? > level) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Threshold of one column of a 2-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Value of the column axis.
    pub column_value: f64,
    /// Refined bracket in the scanned physical parameter.
    pub param_low: f64,
    pub param_high: f64,
    /// Quantum cooperativity at the refined threshold.
    pub cq_minus: f64,
    /// Cooperativities of the bracketing grid cells.
    pub cq_bracket: (f64, f64),
}

/// Minimal quantum cooperativity at which `field` exceeds `level`, per
/// column of a 2-D grid.
///
/// `scan_axis` is the axis along which cooperativity varies (normally
/// Gamma); the other axis indexes the columns. Cells are ordered by
/// ascending cooperativity and the first upward crossing is refined by
/// re-evaluating the pipeline until the bracket in the swept parameter is
/// within 1%.
pub fn threshold_scan(
    grid: &GridResult,
    field: OutputField,
    level: f64,
    scan_axis: usize,
) -> Result<Vec<Result<Threshold>>> {
    let k = grid.output_index(field).ok_or(Error::InvalidParameter {
        field: "field",
        reason: format!("`{}` was not recorded in this sweep", field.name()),
    })?;
    let shape = grid.shape();
    if shape.len() != 2 || scan_axis > 1 {
        return Err(Error::InvalidParameter { field: "axes", reason: "threshold scan needs a 2-D grid".into() });
    }
    let column_axis = 1 - scan_axis;
    let param = grid.axes[scan_axis].param;
    let log = grid.axes[scan_axis].spacing == Spacing::Log;
    let index = |scan: usize, col: usize| if scan_axis == 0 { scan * shape[1] + col } else { col * shape[1] + scan };

    let results = (0..shape[column_axis])
        .into_par_iter()
        .map(|col| {
            let column_value = grid.axis_values[column_axis][col];
            let no_crossing = Error::NoCrossing { column: col, level };
            let mut points: Vec<(f64, f64, f64)> = (0..shape[scan_axis])
                .filter_map(|s| {
                    let cell = &grid.cells[index(s, col)];
                    let v = cell.values.as_ref().ok()?[k];
                    Some((cell.cq_minus?, cell.coords[scan_axis], v))
                })
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let first_above = points.iter().position(|p| p.2 > level).ok_or(no_crossing.clone())?;
            if first_above == 0 {
                return Err(no_crossing);
            }
            let (below, above) = (points[first_above - 1], points[first_above]);
            let mut params = grid.base;
            grid.axes[column_axis].param.apply(&mut params, column_value);
            let eval = |x: f64| {
                let mut p = params;
                param.apply(&mut p, x);
                evaluate_point(&p, grid.channel)?.field(field)
            };
            let (lo, hi) = bisect_crossing(eval, below.1, above.1, level, 0.01, log)?;
            let mid = if log { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            let mut p = params;
            param.apply(&mut p, mid);
            let (_, minus) = mode_pair(&p)?;
            Ok(Threshold {
                column_value,
                param_low: lo.min(hi),
                param_high: lo.max(hi),
                cq_minus: minus.quantum_cooperativity(),
                cq_bracket: (below.0, above.0),
            })
        })
        .collect();
    Ok(results)
}

/// Default Gamma range [Hz] of the two-dimensional presets.
pub const GAMMA_RANGE_HZ: (f64, f64) = (1e-9, 1e-3);
pub const DELTA_RANGE: (f64, f64) = (0.01, 1.0);
pub const GRID_POINTS: usize = 40;

/// Named figure presets.
pub const FIGURE_PRESETS: [&str; 7] = ["fig2", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9"];

fn gamma_delta_grid(
    base: &PhysicalParams,
    channel: MeasurementChannel,
    outputs: Vec<OutputField>,
    points: usize,
) -> SweepSpec {
    SweepSpec {
        base: *base,
        axes: vec![
            Axis::log(AxisParam::Gamma, hz(GAMMA_RANGE_HZ.0), hz(GAMMA_RANGE_HZ.1), points),
            Axis::linear(AxisParam::DeltaMinus, DELTA_RANGE.0, DELTA_RANGE.1, points),
        ],
        channel,
        outputs,
    }
}

/// Sweep behind a figure preset, built on `base`. `points` overrides the
/// per-axis resolution of two-dimensional presets.
pub fn figure_preset(name: &str, base: &PhysicalParams, points: Option<usize>) -> Option<SweepSpec> {
    use OutputField::*;
    let n = points.unwrap_or(GRID_POINTS);
    let x = MeasurementChannel::AmplitudeX;
    let spec = match name {
        "fig2" => gamma_delta_grid(base, x, vec![EpsilonCr, LogNegativity], n),
        "fig3" => gamma_delta_grid(base, x, vec![EMinPlus, EMinMinus, EpsilonCr], n),
        "fig5" => gamma_delta_grid(base, x, vec![PurityPlus, PurityMinus, EpsilonCr], n),
        "fig6" => gamma_delta_grid(base, x, vec![AngleDiff, EpsilonCr], n),
        "fig7" => gamma_delta_grid(base, MeasurementChannel::PhaseY, vec![EpsilonCr, LogNegativity], n),
        "fig8" => SweepSpec {
            base: *base,
            axes: vec![Axis::linear(AxisParam::Zeta, 1.0, 30.0, points.unwrap_or(59))],
            channel: x,
            outputs: vec![LogNegativity, EpsilonCr, OmegaPlus, OmegaMinus],
        },
        "fig9" => SweepSpec {
            base: *base,
            axes: vec![Axis::linear(AxisParam::Zeta, 1.0, 30.0, points.unwrap_or(59))],
            channel: x,
            outputs: vec![PurityPlus, PurityMinus],
        },
        _ => return None,
    };
    Some(spec)
}

/// Named parameter points. Only `black` (the reference setup) has stored
/// coordinates; the others must be supplied by the user.
pub const NAMED_POINTS: [&str; 4] = ["black", "green", "blue", "red"];

pub fn named_point(name: &str) -> Option<PhysicalParams> {
    match name {
        "black" => Some(PhysicalParams::reference_setup()),
        _ => None,
    }
}

/// Gamma in Hz, for reporting.
pub fn gamma_hz(gamma: f64) -> f64 {
    gamma / TAU
}
