use std::path::PathBuf;

use optoent::gaussian::{
    combine_modes, entanglement_from_matrix, epsilon_cr_closed_form, purity, squeeze_eigenvalues, wigner_ellipse,
};
use optoent::model::{
    coupling_from_cavity, filter_coefficients, mode_pair, MeasurementChannel, ModeSpec, PhysicalParams,
};
use optoent::montecarlo::{simulate_ensemble, TrajectoryConfig};
use optoent::riccati::{
    integrate_riccati, steady_state_analytic, steady_state_residuals, Cov2, IntegrationOptions, SystemMatrices,
};
use optoent::sweep::{
    evaluate_point, figure_preset, named_point, run_sweep, OutputField, FIGURE_PRESETS, NAMED_POINTS,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ConfigFile;
use crate::output::{csv_table, emit, grid_csv, grid_json, num, to_json, GridView};
use crate::{ChannelArg, CliError, Command, Common, Format, Norm};

const TAU: f64 = std::f64::consts::TAU;

struct Context {
    config: ConfigFile,
    params: PhysicalParams,
    channel: MeasurementChannel,
    format: Option<Format>,
    out: Option<PathBuf>,
}

impl Context {
    fn new(common: &Common) -> Result<Self, CliError> {
        if let Some(jobs) = common.jobs {
            if jobs == 0 {
                return Err(CliError::Usage("--jobs must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
        }
        if let Some(name) = &common.preset {
            if common.config.is_some() {
                return Err(CliError::Usage("--preset and --config are mutually exclusive".into()));
            }
            if named_point(name).is_none() {
                return Err(if NAMED_POINTS.contains(&name.as_str()) {
                    CliError::Config(format!(
                        "preset `{name}` has no stored coordinates; supply the point with --config or --set"
                    ))
                } else {
                    CliError::Usage(format!("unknown preset `{name}` (known: {})", NAMED_POINTS.join(", ")))
                });
            }
        }
        let mut config = ConfigFile::load(common.config.as_deref(), &common.overrides)?;
        if let Some(ch) = common.channel {
            config.detection.channel = match ch {
                ChannelArg::X => "x".into(),
                ChannelArg::Y => "y".into(),
            };
        }
        if let Some(seed) = common.seed {
            config.montecarlo.seed = seed;
        }
        let channel = config.channel()?;
        let params = config.physical()?;
        if let Some(path) = &common.save_config {
            emit(Some(path), &config.to_toml())?;
        }
        Ok(Context { config, params, channel, format: common.format, out: common.out.clone() })
    }

    fn meta(&self, command: &str) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("command".into(), json!(command));
        m.insert("config".into(), serde_json::to_value(&self.config).expect("config serializes"));
        m
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Derive(common) => derive(&Context::new(&common)?),
        Command::Point(common) => point(&Context::new(&common)?),
        Command::Sweep { common, resolution } => sweep(&Context::new(&common)?, resolution),
        Command::Figure { name, common, resolution } => figure(&Context::new(&common)?, &name, resolution),
        Command::Ellipse { common, norm, points } => ellipse(&Context::new(&common)?, norm, points),
        Command::Validate(common) => validate(&Context::new(&common)?),
    }
}

fn label(mode: &ModeSpec) -> &'static str {
    match mode.label {
        optoent::ModeLabel::Common => "common",
        optoent::ModeLabel::Differential => "differential",
        optoent::ModeLabel::Single => "single",
    }
}

const DERIVE_COLUMNS: [&str; 13] = [
    "mode",
    "Q",
    "C",
    "n_th",
    "omega_m_hz",
    "g_m_hz",
    "kappa_hz",
    "delta",
    "Cq",
    "lambda",
    "Lambda",
    "nbar",
    "gamma_prime",
];

fn derive(ctx: &Context) -> Result<(), CliError> {
    let (plus, minus) = mode_pair(&ctx.params)?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for mode in [plus, minus] {
        let f = filter_coefficients(&mode, ctx.channel)?;
        if f.measurement_rate == 0.0 {
            warnings.push(format!(
                "ZeroMeasurementRate: {} mode has lambda' = 0 in channel {}; no analytic conditional state",
                label(&mode),
                ctx.channel.short_name()
            ));
        }
        let values = [
            mode.quality,
            mode.cooperativity,
            mode.n_th,
            mode.omega_m / TAU,
            mode.g_m / TAU,
            mode.kappa / TAU,
            mode.delta,
            mode.quantum_cooperativity(),
            f.measurement_rate,
            f.cross_correlation,
            f.force_noise,
            f.conditional_decay,
        ];
        let mut row = vec![label(&mode).to_string()];
        row.extend(values.iter().map(|v| num(Some(*v))));
        rows.push(row);
        let mut rec = Map::new();
        rec.insert("mode".into(), json!(label(&mode)));
        for (k, v) in DERIVE_COLUMNS[1..].iter().zip(values) {
            rec.insert((*k).into(), json!(v));
        }
        records.push(Value::Object(rec));
    }
    let content = match ctx.format.unwrap_or(Format::Json) {
        Format::Csv => csv_table(&DERIVE_COLUMNS.map(String::from), &rows),
        Format::Json => {
            let p = &ctx.params;
            let from_amplitude = p
                .cavity
                .as_ref()
                .and_then(|c| coupling_from_cavity(c.length, c.omega_laser, p.mass, p.omega, c.amplitude).ok())
                .map(|g| g / TAU);
            let mut doc = ctx.meta("derive");
            doc.insert("channel".into(), json!(ctx.channel.short_name()));
            doc.insert("coupling_hz".into(), json!(p.coupling / TAU));
            doc.insert("coupling_from_amplitude_hz".into(), json!(from_amplitude));
            doc.insert("modes".into(), Value::Array(records));
            doc.insert(
                "units".into(),
                json!({
                    "Q": "omega_m / gamma_m",
                    "C": "4 g_m^2 / (gamma_m kappa)",
                    "n_th": "phonons",
                    "omega_m_hz": "Hz",
                    "g_m_hz": "Hz",
                    "kappa_hz": "Hz",
                    "lambda": "gamma_m",
                    "Lambda": "gamma_m",
                    "nbar": "gamma_m",
                    "gamma_prime": "gamma_m",
                }),
            );
            doc.insert("warnings".into(), json!(warnings));
            to_json(&Value::Object(doc))
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    emit(ctx.out.as_deref(), &content)
}

fn point(ctx: &Context) -> Result<(), CliError> {
    let report = evaluate_point(&ctx.params, ctx.channel)?;
    let values: Vec<Option<f64>> = OutputField::ALL.iter().map(|&f| report.field(f).ok()).collect();
    let content = match ctx.format.unwrap_or(Format::Json) {
        Format::Csv => {
            csv_table(&OutputField::ALL.map(|f| f.name().to_string()), &[values.iter().map(|v| num(*v)).collect()])
        }
        Format::Json => {
            let mut doc = ctx.meta("point");
            doc.insert("channel".into(), json!(ctx.channel.short_name()));
            let fields: Map<String, Value> =
                OutputField::ALL.iter().zip(&values).map(|(f, v)| (f.name().to_string(), json!(v))).collect();
            doc.insert("values".into(), Value::Object(fields));
            doc.insert("report".into(), serde_json::to_value(&report).expect("report serializes"));
            to_json(&Value::Object(doc))
        }
    };
    emit(ctx.out.as_deref(), &content)
}

fn sweep(ctx: &Context, resolution: Option<usize>) -> Result<(), CliError> {
    let spec = match ctx.config.sweep_spec(&ctx.params, ctx.channel)? {
        Some(spec) => spec,
        None => {
            let mut spec = figure_preset("fig2", &ctx.params, resolution).expect("fig2 preset exists");
            spec.channel = ctx.channel;
            spec
        }
    };
    let grid = run_sweep(&spec)?;
    let content = match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => grid_csv(&grid, GridView::Axes),
        Format::Json => grid_json(&grid, GridView::Axes, ctx.meta("sweep")),
    };
    emit(ctx.out.as_deref(), &content)
}

fn figure(ctx: &Context, name: &str, resolution: Option<usize>) -> Result<(), CliError> {
    let spec = figure_preset(name, &ctx.params, resolution).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown figure `{name}` (known: {}; fig4 ellipses come from the `ellipse` command)",
            FIGURE_PRESETS.join(", ")
        ))
    })?;
    let grid = run_sweep(&spec)?;
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let format = ctx.format.unwrap_or(Format::Csv);
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let views: Vec<(String, GridView)> = if name == "fig2" {
        vec![(format!("{name}_gamma.{ext}"), GridView::Axes), (format!("{name}_cq.{ext}"), GridView::Cooperativity)]
    } else {
        vec![(format!("{name}.{ext}"), GridView::Axes)]
    };
    for (file, view) in views {
        let content = match format {
            Format::Csv => grid_csv(&grid, view),
            Format::Json => {
                let mut meta = ctx.meta("figure");
                meta.insert("figure".into(), json!(name));
                grid_json(&grid, view, meta)
            }
        };
        let path = dir.join(&file);
        emit(Some(&path), &content)?;
        println!("{}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct Contour {
    contour: &'static str,
    semi_major: f64,
    semi_minor: f64,
    angle: f64,
    omega_ref_hz: f64,
    points: Vec<(f64, f64)>,
}

fn ellipse(ctx: &Context, norm: Norm, points: usize) -> Result<(), CliError> {
    if points < 3 {
        return Err(CliError::Usage("--points must be at least 3".into()));
    }
    let report = evaluate_point(&ctx.params, ctx.channel)?;
    let (w_plus, w_minus) = (report.plus.omega_m, report.minus.omega_m);
    let mean = 0.5 * (w_plus + w_minus);
    let (ref_plus, ref_minus) = match norm {
        Norm::Own => (w_plus, w_minus),
        Norm::Mean => (mean, mean),
    };
    let ground_ref = match norm {
        Norm::Own => w_minus,
        Norm::Mean => mean,
    };
    let mut contours = Vec::new();
    for (name, v, w, r) in [
        ("common", report.v_plus, w_plus, ref_plus),
        ("differential", report.v_minus, w_minus, ref_minus),
        ("ground", Cov2::identity(), ground_ref, ground_ref),
    ] {
        let (e, pts) = wigner_ellipse(&v, w, r, points)?;
        contours.push(Contour {
            contour: name,
            semi_major: e.semi_major,
            semi_minor: e.semi_minor,
            angle: e.angle,
            omega_ref_hz: e.omega_ref / TAU,
            points: pts,
        });
    }
    let content = match ctx.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let header = ["contour", "index", "q", "p"].map(String::from);
            let rows: Vec<Vec<String>> = contours
                .iter()
                .flat_map(|c| {
                    c.points
                        .iter()
                        .enumerate()
                        .map(|(i, (q, p))| vec![c.contour.to_string(), i.to_string(), num(Some(*q)), num(Some(*p))])
                })
                .collect();
            csv_table(&header, &rows)
        }
        Format::Json => {
            let mut doc = ctx.meta("ellipse");
            doc.insert("norm".into(), json!(if norm == Norm::Own { "own" } else { "mean" }));
            doc.insert("channel".into(), json!(ctx.channel.short_name()));
            doc.insert("ellipses".into(), serde_json::to_value(&contours).expect("contours serialize"));
            to_json(&Value::Object(doc))
        }
    };
    emit(ctx.out.as_deref(), &content)
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    value: f64,
    tolerance: f64,
    detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }

    fn at_least(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed: value >= tolerance, value, tolerance, detail: detail.into() }
    }
}

fn mode_checks(mode: &ModeSpec, channel: MeasurementChannel, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let name = label(mode);
    let coef = filter_coefficients(mode, channel)?;
    let v = match steady_state_analytic(&coef, mode.quality) {
        Ok(v) => v,
        Err(optoent::Error::ZeroMeasurementRate) => {
            checks.push(Check::at_most(
                format!("riccati_residual_{name}"),
                0.0,
                1e-9,
                "skipped: zero measurement rate",
            ));
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let residual =
        steady_state_residuals(&v, &coef, mode.quality).iter().fold(0.0f64, |m, r| m.max(r.abs())) / coef.force_noise;
    checks.push(Check::at_most(format!("riccati_residual_{name}"), residual, 1e-9, "max |residual| / nbar'"));

    let sys = SystemMatrices::for_mode(mode, channel);
    let t_end = 40.0 / coef.conditional_excess.max(1.0);
    let traj = integrate_riccati(Cov2::thermal(mode.n_th), &sys, t_end, IntegrationOptions::default())?;
    let rel = traj.final_state().frobenius_distance(&v) / v.frobenius_norm();
    checks.push(Check::at_most(
        format!("ode_convergence_{name}"),
        rel,
        1e-6,
        format!("relative Frobenius distance after {} RK4 steps from the thermal state", traj.steps),
    ));

    let lyap = optoent::riccati::lyapunov_steady_state(&sys)?;
    let gap = Cov2::new(lyap.v11 - v.v11, lyap.v12 - v.v12, lyap.v22 - v.v22);
    checks.push(Check::at_least(
        format!("lyapunov_dominance_{name}"),
        squeeze_eigenvalues(&gap).0,
        -1e-9,
        "smallest eigenvalue of V_lyap - V_cond",
    ));
    checks.push(Check::at_least(format!("det_{name}"), v.det(), 1.0 - 1e-9, "det V >= 1 (uncertainty bound)"));
    checks.push(Check::at_most(format!("purity_{name}"), purity(&v)?, 1.0, "purity <= 1"));
    Ok(())
}

fn validate(ctx: &Context) -> Result<(), CliError> {
    let (plus, minus) = mode_pair(&ctx.params)?;
    let mut checks = Vec::new();
    mode_checks(&plus, ctx.channel, &mut checks)?;
    mode_checks(&minus, ctx.channel, &mut checks)?;

    let report = evaluate_point(&ctx.params, ctx.channel)?;
    match epsilon_cr_closed_form(&report.filter_plus, &report.filter_minus, plus.quality, minus.quality) {
        Ok(closed) => {
            let two_mode = combine_modes(&report.v_plus, &report.v_minus, plus.omega_m, minus.omega_m, ctx.params.mass);
            let matrix = entanglement_from_matrix(&two_mode)?.epsilon_cr;
            checks.push(Check::at_most(
                "path_equality",
                (closed - matrix).abs(),
                1e-9,
                format!("closed form {closed} vs SI covariance {matrix}"),
            ));
        }
        Err(optoent::Error::ZeroMeasurementRate) => {
            checks.push(Check::at_most("path_equality", 0.0, 1e-9, "skipped: zero measurement rate"))
        }
        Err(e) => return Err(e.into()),
    }
    let e = report.entanglement;
    checks.push(Check::at_most(
        "log_negativity_clip",
        (e.log_negativity - e.epsilon_cr.max(0.0)).abs(),
        0.0,
        "E_N = max(0, epsilon_cr)",
    ));

    let mc = &ctx.config.montecarlo;
    let cfg = TrajectoryConfig::with_defaults(minus, ctx.channel, mc.trajectories, mc.collect_relaxations, mc.seed)?;
    let sim = simulate_ensemble(&cfg)?;
    checks.push(Check::at_most(
        "monte_carlo_relative",
        sim.max_relative_error(),
        0.05,
        format!("{} trajectories, {} steps each", sim.n_traj, sim.steps_per_trajectory),
    ));
    checks.push(Check::at_most("monte_carlo_standard_errors", sim.max_standard_errors(), 3.0, sim.rng));

    let failed = checks.iter().filter(|c| !c.passed).count();
    let content = match ctx.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let header = ["name", "passed", "value", "tolerance", "detail"].map(String::from);
            let rows: Vec<Vec<String>> = checks
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        c.passed.to_string(),
                        num(Some(c.value)),
                        num(Some(c.tolerance)),
                        c.detail.clone(),
                    ]
                })
                .collect();
            csv_table(&header, &rows)
        }
        Format::Json => {
            let mut doc = ctx.meta("validate");
            doc.insert("channel".into(), json!(ctx.channel.short_name()));
            doc.insert("passed".into(), json!(failed == 0));
            doc.insert("checks".into(), serde_json::to_value(&checks).expect("checks serialize"));
            doc.insert(
                "monte_carlo".into(),
                json!({
                    "seed": sim.seed,
                    "rng": sim.rng,
                    "covariance": sim.covariance,
                    "standard_error": sim.standard_error,
                    "analytic": sim.analytic,
                }),
            );
            to_json(&Value::Object(doc))
        }
    };
    emit(ctx.out.as_deref(), &content)?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
