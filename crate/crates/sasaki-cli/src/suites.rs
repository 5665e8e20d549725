//! One function per subcommand. Each writes its CSV and JSON artifacts into
//! `out` and reports whether its assertions held.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sasaki::comparison::{
    bonnet_myers_solution, closed_form_sr_eps, diameter_bound, epsilon_compare, first_root_x0, royden_compare,
    s0_solution, symmetric_power_basis, trig_compare,
};
use sasaki::exec::{env_thread_cap, with_thread_cap, Exec};
use sasaki::geodesics::{self, exponential_state, hamiltonian, invariants, GeodesicState};
use sasaki::io::{self, finite_or_null};
use sasaki::mcp::{self, BoxSet, ContractionExperiment};
use sasaki::models::{build_heisenberg, identity_report, CurvatureProfile, Epsilon, SasakianModel};
use sasaki::riccati::{self, build_coefficients, s22_lower_bound_check, solve_s};
use sasaki::{Error, Result};

/// Result of one suite.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_json(out: &Path, name: &str, value: &Value) -> Result<()> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn increasing_unit(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|t| !(0.0..1.0).contains(t)) {
        return Err(Error::Config(format!("{name} must be strictly increasing inside [0, 1)")));
    }
    Ok(())
}

pub fn identities(out: &Path, n: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * n + 1;
    let points: Vec<DVector<f64>> =
        (0..20).map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0))).collect();
    let mut csv = create(out, "identities.csv")?;
    writeln!(csv, "model,check,residual")?;
    let mut worst: f64 = 0.0;
    let mut failing = Vec::new();
    for eps in [Epsilon::Value(1.0), Epsilon::Sub] {
        let model = build_heisenberg(n, eps).map_err(|e| Error::Config(e.to_string()))?;
        for (name, v) in identity_report(&model, &points).rows() {
            writeln!(csv, "{eps},{name},{v}")?;
            worst = worst.max(v);
            if !(v <= tol) {
                failing.push(format!("{eps}/{name}"));
            }
        }
    }
    csv.flush()?;
    let pass = failing.is_empty();
    write_json(out, "identities.json", &json!({"pass": pass, "max_residual": worst, "tol": tol, "failing": failing}))?;
    Ok(Outcome { pass, detail: format!("H^{dim}: max residual {worst:.3e} (tol {tol:e})") })
}

pub struct GeodesicParams {
    pub model: SasakianModel,
    /// Frame covector at the origin.
    pub covector: Vec<f64>,
    pub t_end: f64,
    pub steps: usize,
    pub tol: f64,
}

pub fn geodesic(out: &Path, p: &GeodesicParams) -> Result<Outcome> {
    let dim = p.model.dim();
    if p.covector.len() != dim {
        return Err(Error::Config(format!("covector needs {dim} components, got {}", p.covector.len())));
    }
    if p.steps == 0 || !(p.t_end > 0.0) {
        return Err(Error::Config("steps and t-end must be positive".into()));
    }
    let start = GeodesicState::from_frame(DVector::zeros(dim), &DVector::from_column_slice(&p.covector));
    let traj = geodesics::integrate(&p.model, &start, p.t_end, p.steps)?;
    io::write_trajectory(create(out, "trajectory.csv")?, &p.model, &traj)?;
    let h0 = hamiltonian(&p.model, &start);
    let i0 = invariants(&p.model, &start);
    let (mut drift, mut inv_drift, mut oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in &traj {
        drift = drift.max((hamiltonian(&p.model, s) - h0).abs() / h0.max(1.0));
        let i = invariants(&p.model, s);
        inv_drift = inv_drift.max((i.a - i0.a).abs()).max((i.b - i0.b).abs());
        oracle = oracle.max((&s.q - exponential_state(&p.model, &start, s.t).q).amax());
    }
    let pass = drift <= p.tol && inv_drift <= 1e-9 && oracle <= 1e-8;
    write_json(
        out,
        "geodesic.json",
        &json!({
            "pass": pass,
            "hamiltonian": h0,
            "hamiltonian_drift": drift,
            "invariant_drift": inv_drift,
            "closed_form_error": oracle,
        }),
    )?;
    Ok(Outcome {
        pass,
        detail: format!("H drift {drift:.2e}, (a,b) drift {inv_drift:.2e}, closed-form error {oracle:.2e}"),
    })
}

pub struct RiccatiParams {
    pub n: usize,
    pub variant: Epsilon,
    pub profile: CurvatureProfile,
    pub a: f64,
    pub b: f64,
    pub grid: Vec<f64>,
    pub tol: f64,
}

pub fn riccati(out: &Path, p: &RiccatiParams) -> Result<Outcome> {
    increasing_unit("the time grid", &p.grid)?;
    let inv = geodesics::GeodesicInvariants { a: p.a, b: p.b };
    let coeffs = build_coefficients(inv, p.n, p.profile.clone(), p.variant)?;
    let traj = solve_s(&coeffs, &p.grid)?;
    let det = refined_determinant(&coeffs, &p.grid)?;
    let det: Vec<Option<f64>> = det.into_iter().map(Some).collect();
    io::write_riccati(create(out, "riccati.csv")?, &traj, p.variant, &det)?;
    let bound = s22_lower_bound_check(&traj, f64::INFINITY)?;
    let (min_slack, t_worst) = (bound.min_slack, bound.t_worst);
    let pass = min_slack >= -p.tol;
    let asym = traj.max_asymmetry();
    write_json(
        out,
        "riccati.json",
        &json!({
            "pass": pass,
            "s22_min_slack": finite_or_null(min_slack),
            "t_worst": finite_or_null(t_worst),
            "max_asymmetry": asym,
            "det_last": det.last().copied().flatten(),
        }),
    )?;
    Ok(Outcome { pass, detail: format!("S22 bound min slack {min_slack:.3e}, asymmetry {asym:.1e}") })
}

/// Determinant with the quadrature grid refined until its error estimate is below 1e-8.
fn refined_determinant(coeffs: &riccati::RiccatiCoefficients, ts: &[f64]) -> Result<Vec<f64>> {
    let mut quarter = 256;
    loop {
        match riccati::determinant(coeffs, ts, quarter, 1e-8) {
            Err(Error::CoarseGrid { .. }) if quarter < 16384 => quarter *= 4,
            r => return r,
        }
    }
}

pub struct CompareParams {
    pub n: usize,
    pub variant: Epsilon,
    pub profile: CurvatureProfile,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub grid: Vec<f64>,
    pub tol: f64,
}

pub fn compare(out: &Path, p: &CompareParams) -> Result<Outcome> {
    increasing_unit("the time grid", &p.grid)?;
    let inv = geodesics::GeodesicInvariants { a: p.a, b: p.b };
    let coeffs = build_coefficients(inv, p.n, p.profile.clone(), p.variant)?;
    let traj = solve_s(&coeffs, &p.grid)?;
    let report = match p.variant {
        Epsilon::Sub => royden_compare(&traj, p.a, &s0_solution(p.a, p.n, p.c)?, p.tol),
        Epsilon::Value(e) => epsilon_compare(&traj, &closed_form_sr_eps(p.a, e, p.n, p.c)?, p.tol),
    };
    io::write_comparison(create(out, "comparison.csv")?, &report)?;
    write_json(out, "comparison.json", &io::comparison_summary(&report))?;
    let mut pass = report.pass;
    let mut detail = format!("min slack {:.3e} at t = {}", report.min_slack, report.t_worst);

    // Against the trigonometric solution when the profile carries a positive lower bound.
    if let (Epsilon::Sub, CurvatureProfile::Isotropic(r)) = (p.variant, &p.profile) {
        if *r > 0.0 {
            let sr = bonnet_myers_solution(p.a, *r, p.n, p.c)?;
            if let Some(t0) = sr.blow_up_time() {
                detail += &format!("; trigonometric comparison skipped, conjugate time {t0:.4} < 1");
            } else {
                let trig = trig_compare(&traj, &sr, p.tol)?;
                io::write_comparison(create(out, "comparison_trig.csv")?, &trig)?;
                write_json(out, "comparison_trig.json", &io::comparison_summary(&trig))?;
                pass &= trig.pass;
                detail += &format!("; trigonometric min slack {:.3e}", trig.min_slack);
            }
        }
    }
    Ok(Outcome { pass, detail })
}

pub struct ClosedFormParams {
    pub n: usize,
    pub a: f64,
    pub eps: f64,
    pub r: f64,
    pub c: f64,
    pub tol: f64,
}

pub fn closed_form(out: &Path, p: &ClosedFormParams) -> Result<Outcome> {
    let grid = |lo: f64, hi: f64| (0..200).map(move |k| lo + (hi - lo) * k as f64 / 199.0);
    let s0 = s0_solution(p.a, p.n, p.c)?;
    let sr = closed_form_sr_eps(p.a, p.eps, p.n, p.c)?;
    let basis = symmetric_power_basis(p.a, p.eps)?;
    let trig = bonnet_myers_solution(p.a, p.r, p.n, p.c)?;
    let trig_end = trig.blow_up_time().map_or(0.95, |t0| 0.95f64.min(0.95 * t0));

    let mut rows: Vec<(&str, f64, f64)> = Vec::new();
    rows.extend(grid(0.0, 0.99).map(|t| ("s0", t, s0.residual(t))));
    rows.extend(grid(0.05, 1.0).map(|t| ("sr_eps", t, sr.residual(t))));
    for t in grid(0.05, 1.0) {
        let second = basis.second_order_residual(basis.f1(t), t).max(basis.second_order_residual(basis.f2(t), t));
        rows.push(("second_order_basis", t, second));
        let third = basis.squares(t).iter().map(|g| basis.third_order_residual(*g, t)).fold(0.0, f64::max);
        rows.push(("symmetric_square", t, third));
    }
    rows.extend(grid(0.05, trig_end).map(|t| ("trig", t, trig.residual(t))));
    rows.sort_by(|x, y| x.0.cmp(y.0).then(x.1.total_cmp(&y.1)));

    let mut csv = create(out, "closed_form.csv")?;
    writeln!(csv, "solution,t,residual")?;
    let mut worst = serde_json::Map::new();
    for (name, t, v) in &rows {
        writeln!(csv, "{name},{t},{v}")?;
        let w = worst.get(*name).and_then(Value::as_f64).unwrap_or(0.0);
        worst.insert(name.to_string(), json!(w.max(*v)));
    }
    csv.flush()?;
    let max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.2 <= p.tol);
    write_json(out, "closed_form.json", &json!({"pass": pass, "tol": p.tol, "max_residual": worst}))?;
    Ok(Outcome { pass, detail: format!("max relative residual {max:.2e} (tol {:e})", p.tol) })
}

pub struct McpParams {
    pub model: SasakianModel,
    pub exponent: u32,
    pub grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// First coordinate of the lower corner of the unit box.
    pub offset: f64,
    pub tol: f64,
}

pub fn mcp(out: &Path, p: &McpParams) -> Result<Outcome> {
    increasing_unit("contraction times", &p.grid)?;
    let dim = p.model.dim();
    let mut lo = DVector::zeros(dim);
    lo[0] = p.offset;
    let exp = ContractionExperiment {
        model: p.model,
        center: DVector::zeros(dim),
        set: BoxSet::unit(lo),
        t_grid: p.grid.clone(),
        samples: p.samples,
        seed: p.seed,
    };
    let mut report = with_thread_cap(env_thread_cap(), || mcp::mc_contraction(&exp, p.exponent, Exec::Parallel))?;
    report.pass = report.rows.iter().all(|r| r.slack >= -p.tol);
    io::write_mc(create(out, "mcp.csv")?, &report)?;
    write_json(out, "mcp.json", &io::mc_summary(&report))?;
    let min = report.rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        pass: report.pass,
        detail: format!("N = {}, {} samples, min slack {min:.3e}", p.exponent, p.samples),
    })
}

pub struct BonnetMyersParams {
    pub n: usize,
    pub r: f64,
    pub a_scan: Vec<f64>,
    pub c: f64,
    /// Relative half-width of the band around `a r = 2 x0` that is not checked.
    pub band: f64,
}

pub fn bonnet_myers(out: &Path, p: &BonnetMyersParams) -> Result<Outcome> {
    let x0 = first_root_x0();
    let onset = diameter_bound(p.r)?;
    let mut csv = create(out, "bonnet_myers.csv")?;
    writeln!(csv, "a,ar_over_2x0,blow_up_time,diverges,predicted")?;
    let mut mismatches = 0;
    let mut observed_onset = None;
    for &a in &p.a_scan {
        let sr = bonnet_myers_solution(a, p.r, p.n, p.c)?;
        let ratio = a / onset;
        let diverges = sr.diverges();
        let predicted = ratio > 1.0;
        if diverges && observed_onset.is_none() {
            observed_onset = Some(a);
        }
        if diverges != predicted && (ratio - 1.0).abs() > p.band {
            mismatches += 1;
        }
        let t0 = sr.blow_up_time().map(|t| t.to_string()).unwrap_or_default();
        writeln!(csv, "{a},{ratio},{t0},{diverges},{predicted}")?;
    }
    csv.flush()?;
    let pass = mismatches == 0;
    write_json(
        out,
        "bonnet_myers.json",
        &json!({
            "pass": pass,
            "x0": x0,
            "predicted_onset_a": onset,
            "observed_onset_a": observed_onset,
            "mismatches": mismatches,
        }),
    )?;
    let seen = observed_onset.map_or("none in scan".to_string(), |a| format!("{a}"));
    Ok(Outcome {
        pass,
        detail: format!("x0 = {x0:.12}, predicted onset a = {onset:.6}, observed onset {seen}, {mismatches} mismatches"),
    })
}
