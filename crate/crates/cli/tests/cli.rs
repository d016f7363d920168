use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn optoent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optoent")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn mode<'a>(doc: &'a Value, name: &str) -> &'a Value {
    doc["modes"].as_array().unwrap().iter().find(|m| m["mode"] == name).unwrap()
}

fn close(value: f64, expected: f64, rel: f64) -> bool {
    (value / expected - 1.0).abs() <= rel
}

#[test]
fn derive_reference_point() {
    let out = optoent(&["derive"]);
    assert!(out.status.success());
    let doc = json(&out);
    let plus = mode(&doc, "common");
    let minus = mode(&doc, "differential");
    assert!(close(plus["C"].as_f64().unwrap(), 1.6e5, 0.03));
    assert!(close(plus["n_th"].as_f64().unwrap(), 1.8e3, 0.05));
    assert!(close(plus["Q"].as_f64().unwrap(), 1.6e5, 0.05));
    assert!(close(minus["Q"].as_f64().unwrap(), 7.5e4, 0.05));
    assert!(close(doc["coupling_from_amplitude_hz"].as_f64().unwrap(), 2.68e5, 0.01));
    assert_eq!(doc["warnings"].as_array().unwrap().len(), 0);
}

#[test]
fn derive_without_recycling_is_symmetric() {
    let doc = json(&optoent(&["derive", "--set", "cavity.zeta=1"]));
    let (plus, minus) = (mode(&doc, "common"), mode(&doc, "differential"));
    for key in ["Q", "C", "n_th", "omega_m_hz", "lambda", "gamma_prime"] {
        assert_eq!(plus[key], minus[key], "{key}");
    }
}

#[test]
fn derive_flags_zero_measurement_rate() {
    let out = optoent(&["derive", "--set", "cavity.delta_minus=0", "--channel", "x"]);
    assert!(out.status.success());
    let doc = json(&out);
    let warnings = doc["warnings"].as_array().unwrap();
    assert!(!warnings.is_empty());
    assert!(warnings[0].as_str().unwrap().contains("ZeroMeasurementRate"));
}

#[test]
fn derive_csv_schema() {
    let out = optoent(&["derive", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "mode,Q,C,n_th,omega_m_hz,g_m_hz,kappa_hz,delta,Cq,lambda,Lambda,nbar,gamma_prime"
    );
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn point_reports_entanglement() {
    let doc = json(&optoent(&["point"]));
    let eps = doc["values"]["epsilon_cr"].as_f64().unwrap();
    assert!(eps > 0.0);
    assert_eq!(doc["values"]["E_N"].as_f64().unwrap(), eps);
}

#[test]
fn sweep_csv_schema_and_determinism() {
    let a = optoent(&["sweep", "--resolution", "5", "--jobs", "1"]);
    let b = optoent(&["sweep", "--resolution", "5", "--jobs", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "gamma_hz,delta_minus,Cq_minus,status,epsilon_cr,E_N");
    assert_eq!(text.lines().count(), 26);
}

#[test]
fn sweep_from_config_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zeta.toml");
    std::fs::write(
        &cfg,
        "[sweep]\noutputs = [\"E_N\", \"purity_plus\"]\n\n[[sweep.axis]]\nparam = \"zeta\"\nstart = 1.0\nend = 5.0\npoints = 5\n",
    )
    .unwrap();
    let out = optoent(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "zeta,Cq_minus,status,E_N,purity_plus");
    assert_eq!(text.lines().count(), 6);
}

fn records(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn fig2_writes_two_views_of_the_same_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = optoent(&["figure", "fig2", "--resolution", "6", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gamma = records(&dir.path().join("fig2_gamma.csv"));
    let cq = records(&dir.path().join("fig2_cq.csv"));
    assert_eq!(gamma.len(), 36);
    for (g, c) in gamma.iter().zip(&cq) {
        // gamma view: gamma, delta, Cq, status, fields; cq view: Cq, delta, gamma, status, fields
        assert_eq!(g[0], c[2]);
        assert_eq!(g[1], c[1]);
        assert_eq!(g[2], c[0]);
        assert_eq!(g[3..], c[3..]);
    }
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let out = optoent(&["figure", "fig4", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ellipse_contours() {
    let out = optoent(&["ellipse", "--preset", "black", "--norm", "own", "--format", "json", "--points", "64"]);
    assert!(out.status.success());
    let doc = json(&out);
    let ellipses = doc["ellipses"].as_array().unwrap();
    let names: Vec<&str> = ellipses.iter().map(|e| e["contour"].as_str().unwrap()).collect();
    assert_eq!(names, ["common", "differential", "ground"]);
    for pt in ellipses[2]["points"].as_array().unwrap() {
        let (q, p) = (pt[0].as_f64().unwrap(), pt[1].as_f64().unwrap());
        assert!((q.hypot(p) - 1.0).abs() < 1e-12);
    }
    for e in &ellipses[..2] {
        assert!(e["semi_minor"].as_f64().unwrap() < 1.0, "both modes are squeezed at the reference point");
    }
}

#[test]
fn placeholder_presets_need_coordinates() {
    let out = optoent(&["ellipse", "--preset", "red"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("red"));
}

#[test]
fn unknown_config_key_is_named() {
    let out = optoent(&["point", "--set", "cavity.finesse=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("finesse"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[detection]\nefficency = 0.9\n").unwrap();
    let out = optoent(&["point", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("efficency"));
}

#[test]
fn invalid_values_are_config_errors() {
    let out = optoent(&["point", "--set", "detection.efficiency=1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("detection.efficiency"));
}

#[test]
fn io_errors_have_their_own_code() {
    let out = optoent(&["point", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(3));
    let out = optoent(&["point", "--out", "/proc/forbidden/out.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn effective_config_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("effective.toml");
    let first = optoent(&[
        "point",
        "--set",
        "cavity.delta_minus=0.15",
        "--set",
        "mirror.temperature=77",
        "--channel",
        "y",
        "--save-config",
        saved.to_str().unwrap(),
    ]);
    assert!(first.status.success());
    let second = optoent(&["point", "--config", saved.to_str().unwrap()]);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn validate_reference_point_passes() {
    let out = optoent(&["validate", "--set", "montecarlo.trajectories=400", "--seed", "3"]);
    let doc = json(&out);
    assert_eq!(out.status.code(), Some(0), "{doc:#}");
    assert_eq!(doc["passed"], true);
    let names: Vec<&str> = doc["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for expected in [
        "riccati_residual_common",
        "ode_convergence_differential",
        "lyapunov_dominance_common",
        "path_equality",
        "monte_carlo_relative",
    ] {
        assert!(names.contains(&expected), "{expected}");
    }
    assert!(doc["monte_carlo"]["rng"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn failed_check_exits_one_with_report() {
    // a window of a few steps cannot resolve the covariance to 5%
    let out = optoent(&[
        "validate",
        "--set",
        "montecarlo.trajectories=100",
        "--set",
        "montecarlo.collect_relaxations=0.0001",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    assert_eq!(doc["passed"], false);
}
