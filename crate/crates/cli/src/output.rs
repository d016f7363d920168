//! CSV/JSON rendering and file output.

use std::io::Write;
use std::path::Path;

use optoent::sweep::{gamma_hz, AxisParam, Cell, GridResult};
use serde_json::{json, Map, Value};

use crate::CliError;

/// Writes `content` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, content).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

pub fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON value serializes");
    s.push('\n');
    s
}

/// Shortest round-trip decimal (exponent form for very large or small
/// magnitudes); empty for missing values.
pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => serde_json::Number::from_f64(x).map(|n| n.to_string()).unwrap_or_else(|| x.to_string()),
        None => String::new(),
    }
}

pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for row in rows {
        w.write_record(row).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

/// Column name of an axis coordinate; Gamma is reported in Hz.
fn axis_column(param: AxisParam) -> &'static str {
    match param {
        AxisParam::Gamma => "gamma_hz",
        AxisParam::DeltaMinus => "delta_minus",
        AxisParam::Zeta => "zeta",
    }
}

fn axis_display(param: AxisParam, value: f64) -> f64 {
    match param {
        AxisParam::Gamma => gamma_hz(value),
        _ => value,
    }
}

/// How the leading columns of a grid are labelled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridView {
    /// Swept axes first, then the derived cooperativity.
    Axes,
    /// Cooperativity replaces Gamma as the leading column.
    Cooperativity,
}

#[derive(Clone, Copy)]
enum Column {
    Cooperativity,
    Axis(usize, AxisParam),
}

impl Column {
    fn name(self) -> &'static str {
        match self {
            Column::Cooperativity => "Cq_minus",
            Column::Axis(_, p) => axis_column(p),
        }
    }

    fn value(self, cell: &Cell) -> Option<f64> {
        match self {
            Column::Cooperativity => cell.cq_minus,
            Column::Axis(i, p) => Some(axis_display(p, cell.coords[i])),
        }
    }
}

fn leading_columns(grid: &GridResult, view: GridView) -> Vec<Column> {
    let axes = grid.axes.iter().enumerate().map(|(i, a)| Column::Axis(i, a.param));
    match view {
        GridView::Axes => axes.chain([Column::Cooperativity]).collect(),
        GridView::Cooperativity => {
            let (gamma, rest): (Vec<_>, Vec<_>) = axes.partition(|c| matches!(c, Column::Axis(_, AxisParam::Gamma)));
            [Column::Cooperativity].into_iter().chain(rest).chain(gamma).collect()
        }
    }
}

/// One line per cell: leading columns, `status`, then the requested fields.
pub fn grid_csv(grid: &GridResult, view: GridView) -> String {
    let leading = leading_columns(grid, view);
    let mut header: Vec<String> = leading.iter().map(|c| c.name().to_string()).collect();
    header.push("status".into());
    header.extend(grid.outputs.iter().map(|f| f.name().to_string()));
    let rows: Vec<Vec<String>> = grid
        .cells
        .iter()
        .map(|cell| {
            let mut row: Vec<String> = leading.iter().map(|c| num(c.value(cell))).collect();
            match &cell.values {
                Ok(values) => {
                    row.push("ok".into());
                    row.extend(values.iter().map(|v| num(Some(*v))));
                }
                Err(fail) => {
                    row.push(fail.kind.clone());
                    row.extend(grid.outputs.iter().map(|_| String::new()));
                }
            }
            row
        })
        .collect();
    csv_table(&header, &rows)
}

/// Same records as [`grid_csv`] plus run metadata.
pub fn grid_json(grid: &GridResult, view: GridView, meta: Map<String, Value>) -> String {
    let leading = leading_columns(grid, view);
    let cells: Vec<Value> = grid
        .cells
        .iter()
        .map(|cell| {
            let mut rec = Map::new();
            for c in &leading {
                rec.insert(c.name().into(), json!(c.value(cell)));
            }
            match &cell.values {
                Ok(values) => {
                    rec.insert("status".into(), json!("ok"));
                    for (field, v) in grid.outputs.iter().zip(values) {
                        rec.insert(field.name().into(), json!(v));
                    }
                }
                Err(fail) => {
                    rec.insert("status".into(), json!(fail.kind));
                    rec.insert("message".into(), json!(fail.message));
                }
            }
            Value::Object(rec)
        })
        .collect();
    let axes: Vec<Value> = grid
        .axes
        .iter()
        .map(|a| {
            json!({
                "param": axis_column(a.param),
                "start": axis_display(a.param, a.start),
                "end": axis_display(a.param, a.end),
                "points": a.points,
                "spacing": a.spacing,
            })
        })
        .collect();
    let mut doc = meta;
    doc.insert("version".into(), json!(grid.version));
    doc.insert("channel".into(), json!(grid.channel.short_name()));
    doc.insert("axes".into(), Value::Array(axes));
    doc.insert("outputs".into(), json!(grid.outputs.iter().map(|f| f.name()).collect::<Vec<_>>()));
    doc.insert("cells".into(), Value::Array(cells));
    to_json(&Value::Object(doc))
}
