//! CSV and JSON emission. Every CSV starts with `#`-prefixed metadata lines;
//! floats are written in shortest round-trip form, so identical inputs give
//! byte-identical files.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{FilterError, Result};
use crate::error_analysis::ErrorReport;
use crate::operators::SpectralOperator;
use crate::simulation::{EnsembleStats, SampleTrajectory};
use crate::tf::RationalTransferFunction;

/// Ordered `key: value` pairs written as comment lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts with the crate version.
    pub fn versioned() -> Self {
        Self::new().with("version", env!("CARGO_PKG_VERSION"))
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write_comments<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}: {v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.entries.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
    }
}

fn io_err(e: impl std::fmt::Display) -> FilterError {
    FilterError::Io(e.to_string())
}

fn csv_writer<W: Write>(mut out: W, meta: &Metadata) -> Result<csv::Writer<W>> {
    meta.write_comments(&mut out).map_err(io_err)?;
    Ok(csv::Writer::from_writer(out))
}

fn write_records<W: Write, R: Serialize>(
    mut wtr: csv::Writer<W>,
    header: &[&str],
    rows: impl Iterator<Item = R>,
) -> Result<()> {
    wtr.write_record(header).map_err(io_err)?;
    for row in rows {
        wtr.serialize(row).map_err(io_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// `t,x`
pub fn write_trajectory<W: Write>(out: W, traj: &SampleTrajectory, meta: &Metadata) -> Result<()> {
    let wtr = csv_writer(out, meta)?;
    write_records(wtr, &["t", "x"], traj.grid.iter().zip(&traj.values))
}

/// `t,x_1,...,x_N`, all trajectories on one grid.
pub fn write_trajectories_wide<W: Write>(out: W, trajs: &[SampleTrajectory], meta: &Metadata) -> Result<()> {
    let first = trajs.first().ok_or_else(|| FilterError::InvalidParameter("no trajectories to write".into()))?;
    if trajs.iter().any(|t| t.grid != first.grid) {
        return Err(FilterError::GridMismatch("trajectories do not share a grid".into()));
    }
    let mut wtr = csv_writer(out, meta)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=trajs.len()).map(|k| format!("x_{k}")));
    wtr.write_record(&header).map_err(io_err)?;
    let mut row = Vec::with_capacity(trajs.len() + 1);
    for (k, t) in first.grid.iter().enumerate() {
        row.clear();
        row.push(*t);
        row.extend(trajs.iter().map(|tr| tr.values[k]));
        wtr.serialize(&row).map_err(io_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// `t,mean,var,stderr`, with `stderr` the standard error of the mean.
pub fn write_stats<W: Write>(out: W, stats: &EnsembleStats, meta: &Metadata) -> Result<()> {
    let wtr = csv_writer(out, meta)?;
    let rows = (0..stats.grid.len()).map(|k| (stats.grid[k], stats.mean[k], stats.variance[k], stats.mean_stderr[k]));
    write_records(wtr, &["t", "mean", "var", "stderr"], rows)
}

/// Row-major `i,j,value`.
pub fn write_matrix_long<W: Write>(out: W, op: &SpectralOperator, meta: &Metadata) -> Result<()> {
    let wtr = csv_writer(out, meta)?;
    let m = op.matrix();
    let rows = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j, m[(i, j)])));
    write_records(wtr, &["i", "j", "value"], rows)
}

/// One CSV row per matrix row, no header line.
pub fn write_matrix_dense<W: Write>(out: W, op: &SpectralOperator, meta: &Metadata) -> Result<()> {
    let mut wtr = csv_writer(out, meta)?;
    let m = op.matrix();
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        wtr.serialize(row).map_err(io_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// `{T, L, provenance, tf, matrix}` with the matrix as nested row arrays.
pub fn operator_json(op: &SpectralOperator, tf: Option<&RationalTransferFunction>, meta: &Metadata) -> Value {
    let m = op.matrix();
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    json!({
        "metadata": meta.to_json(),
        "T": op.horizon(),
        "L": op.order(),
        "provenance": op.provenance().as_str(),
        "tf": tf,
        "matrix": rows,
    })
}

/// `L,epsilon,epsilon1,epsilon2`
pub fn write_error_table<W: Write>(out: W, reports: &[ErrorReport], meta: &Metadata) -> Result<()> {
    let wtr = csv_writer(out, meta)?;
    let rows = reports.iter().map(|r| (r.order, r.epsilon, r.epsilon1, r.epsilon2));
    write_records(wtr, &["L", "epsilon", "epsilon1", "epsilon2"], rows)
}

/// One row per labelled filter, one column per order, cells `ε (ε₁)`.
pub fn error_table_markdown(rows: &[(String, Vec<ErrorReport>)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let mut s = String::from("| |");
    for r in first {
        s.push_str(&format!(" L = {} |", r.order));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(first.len()));
    s.push('\n');
    for (label, reports) in rows {
        s.push_str(&format!("| {label} |"));
        for r in reports {
            s.push_str(&format!(" {} ({}) |", format_sig(r.epsilon), format_sig(r.epsilon1)));
        }
        s.push('\n');
    }
    s
}

fn format_sig(x: f64) -> String {
    if x.abs() >= 1e-5 {
        format!("{x:.6}")
    } else {
        format!("{x:.2e}")
    }
}

/// `{"num": [...], "den": [...]}`
pub fn parse_transfer_function(text: &str) -> Result<RationalTransferFunction> {
    serde_json::from_str(text).map_err(|e| {
        // validation failures surface through serde as custom messages
        FilterError::Parse(e.to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::integration_matrix;
    use crate::simulation::Method;

    fn traj() -> SampleTrajectory {
        SampleTrajectory {
            grid: vec![0.0, 0.5, 1.0],
            values: vec![0.1, -0.25, 1.0 / 3.0],
            method: Method::Spectral,
            seed: 7,
            stream_id: 0,
            coefficients: None,
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj(), &Metadata::new().with("seed", 7)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# seed: 7");
        assert_eq!(lines[1], "t,x");
        assert_eq!(lines[2], "0.0,0.1");
        let last: f64 = lines[4].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(last, 1.0 / 3.0);
    }

    #[test]
    fn wide_layout_and_mismatch() {
        let mut buf = Vec::new();
        write_trajectories_wide(&mut buf, &[traj(), traj()], &Metadata::new()).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,x_1,x_2\n"));
        let mut other = traj();
        other.grid[1] = 0.4;
        assert!(write_trajectories_wide(Vec::new(), &[traj(), other], &Metadata::new()).is_err());
    }

    #[test]
    fn matrix_outputs() {
        let op = integration_matrix(5.0, 2).unwrap();
        let mut buf = Vec::new();
        write_matrix_long(&mut buf, &op, &Metadata::new()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("0,0,2.5"));
        let v = operator_json(&op, None, &Metadata::versioned());
        assert_eq!(v["L"], 2);
        assert_eq!(v["matrix"][0][0], 2.5);
        assert_eq!(v["provenance"], "closed_form");
    }

    #[test]
    fn transfer_function_json() {
        let tf = parse_transfer_function(r#"{"num": [1], "den": [1, 3]}"#).unwrap();
        assert_eq!(tf.den(), &[1.0, 3.0]);
        let err = parse_transfer_function(r#"{"num": [1, 2], "den": [1, 3]}"#).unwrap_err();
        assert!(err.to_string().contains("NotProper"), "{err}");
    }

    #[test]
    fn markdown_cells() {
        let r = ErrorReport { order: 4, epsilon: 0.125603, epsilon1: 0.09172, epsilon2: 0.0, kernel_norm_sq: 0.6 };
        let md = error_table_markdown(&[("x1".into(), vec![r])]);
        assert!(md.contains("| x1 | 0.125603 (0.091720) |"));
    }
}
