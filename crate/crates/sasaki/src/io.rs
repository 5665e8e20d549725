//! CSV and JSON report writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! inputs give byte-identical files.

use std::io::Write;

use serde_json::json;

use crate::comparison::ComparisonReport;
use crate::error::Result;
use crate::geodesics::{hamiltonian, GeodesicState};
use crate::mcp::McReport;
use crate::models::{Epsilon, SasakianModel};
use crate::riccati::{horizontal_laplacian, MatrixTrajectory};

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `t,x1..xn,y1..yn,z,px1..pxn,py1..pyn,pz,H`.
pub fn write_trajectory<W: Write>(w: W, model: &SasakianModel, states: &[GeodesicState]) -> Result<()> {
    let n = model.n;
    let mut header = vec!["t".to_string()];
    for prefix in ["", "p"] {
        header.extend((1..=n).map(|i| format!("{prefix}x{i}")));
        header.extend((1..=n).map(|i| format!("{prefix}y{i}")));
        header.push(format!("{prefix}z"));
    }
    header.push("H".into());
    let mut out = csv_writer(w);
    out.write_record(&header)?;
    for s in states {
        let mut row = vec![num(s.t)];
        row.extend(s.q.iter().chain(s.p.iter()).map(|v| num(*v)));
        row.push(num(hamiltonian(model, s)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `t,S_00,S_01,..,S_kk,laplacian,det` (upper triangle, row-major). `det` is
/// left empty where it is not supplied.
pub fn write_riccati<W: Write>(w: W, traj: &MatrixTrajectory, variant: Epsilon, det: &[Option<f64>]) -> Result<()> {
    let dim = traj.matrices.iter().flatten().next().map_or(0, |m| m.nrows());
    let mut header = vec!["t".to_string()];
    for i in 0..dim {
        header.extend((i..dim).map(|j| format!("S_{i}{j}")));
    }
    header.extend(["laplacian".to_string(), "det".to_string()]);
    let mut out = csv_writer(w);
    out.write_record(&header)?;
    for (k, (t, m)) in traj.times.iter().zip(&traj.matrices).enumerate() {
        let Some(m) = m else { continue };
        let mut row = vec![num(*t)];
        for i in 0..dim {
            row.extend((i..dim).map(|j| num(m[(i, j)])));
        }
        row.push(num(horizontal_laplacian(m, variant)));
        row.push(det.get(k).copied().flatten().map(num).unwrap_or_default());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `t,lhs_eig_min,rhs_eig_max,slack`.
pub fn write_comparison<W: Write>(w: W, report: &ComparisonReport) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["t", "lhs_eig_min", "rhs_eig_max", "slack"])?;
    for r in &report.rows {
        out.write_record([num(r.t), num(r.lhs_eig_min), num(r.rhs_eig_max), num(r.slack)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn comparison_summary(report: &ComparisonReport) -> serde_json::Value {
    json!({
        "pass": report.pass,
        "min_slack": finite_or_null(report.min_slack),
        "t_worst": finite_or_null(report.t_worst),
    })
}

/// `t,ratio_estimate,stderr,bound,slack`.
pub fn write_mc<W: Write>(w: W, report: &McReport) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["t", "ratio_estimate", "stderr", "bound", "slack"])?;
    for r in &report.rows {
        out.write_record([num(r.t), num(r.ratio_estimate), num(r.stderr), num(r.bound), num(r.slack)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn mc_summary(report: &McReport) -> serde_json::Value {
    let (min_slack, t_worst) =
        report.rows.iter().fold((f64::INFINITY, f64::NAN), |(m, tw), r| if r.slack < m { (r.slack, r.t) } else { (m, tw) });
    json!({
        "pass": report.pass,
        "exponent": report.exponent,
        "samples": report.samples,
        "failures": report.failures,
        "min_slack": finite_or_null(min_slack),
        "t_worst": finite_or_null(t_worst),
    })
}

pub fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}
