//! Measure contraction on Heisenberg models.
//!
//! `phi_t(x)` moves `x` a fraction `t` along the minimizing geodesic to the
//! center. Its Jacobian determinant is available two ways: from the Riccati
//! Laplacian ([`riccati_determinant`]) and by finite differences of the
//! closed-form map ([`jacobian_oracle`]). Monte Carlo averages of the latter
//! estimate `vol(phi_t(U)) / vol(U)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geodesics::{exponential_state, invariants, shoot, GeodesicInvariants};
use crate::models::{CurvatureProfile, SasakianModel};
use crate::riccati;

/// Finite-difference step of the Jacobian oracle.
pub const FD_STEP: f64 = 1e-5;

/// Geodesics with `|p_V|` above this fraction of `2 pi` are treated as near-conjugate.
pub const CONJUGATE_MARGIN: f64 = 0.98;

/// Points per Monte Carlo batch. Each batch owns one generator stream.
pub const BATCH: usize = 1024;

/// `phi_t(x)` at each of `ts`.
pub fn contraction(model: &SasakianModel, x: &DVector<f64>, center: &DVector<f64>, ts: &[f64]) -> Result<Vec<DVector<f64>>> {
    let start = shoot(model, x, center)?;
    Ok(ts.iter().map(|&t| exponential_state(model, &start, t).q).collect())
}

fn near_conjugate(model: &SasakianModel, x: &DVector<f64>, center: &DVector<f64>) -> Result<GeodesicInvariants> {
    let inv = invariants(model, &shoot(model, x, center)?);
    if inv.b.abs() > CONJUGATE_MARGIN * 2.0 * std::f64::consts::PI {
        return Err(Error::Shooting(format!("near-conjugate geodesic (p_V = {})", inv.b)));
    }
    Ok(inv)
}

fn jacobian_dets(model: &SasakianModel, x: &DVector<f64>, center: &DVector<f64>, ts: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = x.len();
    if ts.iter().all(|&t| t == 0.0) {
        return Ok(vec![1.0; ts.len()]);
    }
    let mut cols: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); ts.len()];
    for k in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let fp = contraction(model, &xp, center, ts)?;
        let fm = contraction(model, &xm, center, ts)?;
        for (j, (p, m)) in fp.iter().zip(&fm).enumerate() {
            cols[j].set_column(k, &((p - m) / (2.0 * h)));
        }
    }
    // phi_0 is the identity map.
    Ok(ts.iter().zip(cols).map(|(&t, m)| if t == 0.0 { 1.0 } else { m.determinant() }).collect())
}

/// `det(d phi_t)` at each of `ts` by central differences with one Richardson
/// refinement (steps `h` and `h/2`).
pub fn jacobian_oracle(model: &SasakianModel, x: &DVector<f64>, center: &DVector<f64>, ts: &[f64]) -> Result<Vec<f64>> {
    near_conjugate(model, x, center)?;
    let coarse = jacobian_dets(model, x, center, ts, FD_STEP)?;
    let fine = jacobian_dets(model, x, center, ts, FD_STEP / 2.0)?;
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

/// `det(d phi_t)` at each of `ts` from the integrated Laplacian of the
/// Riccati solution along the geodesic from `x` to `center`.
pub fn riccati_determinant(
    model: &SasakianModel,
    x: &DVector<f64>,
    center: &DVector<f64>,
    ts: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let inv = near_conjugate(model, x, center)?;
    let coeffs = riccati::build_coefficients(inv, model.n, CurvatureProfile::Flat, model.epsilon)?;
    riccati::determinant(&coeffs, ts, 256, tol)
}

/// Axis-aligned box in coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl BoxSet {
    /// Unit cube with lower corner `lo`.
    pub fn unit(lo: DVector<f64>) -> Self {
        let hi = lo.add_scalar(1.0);
        BoxSet { lo, hi }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(self.lo.len(), |i, _| rng.random_range(self.lo[i]..self.hi[i]))
    }
}

#[derive(Clone, Debug)]
pub struct ContractionExperiment {
    pub model: SasakianModel,
    pub center: DVector<f64>,
    pub set: BoxSet,
    pub t_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McRow {
    pub t: f64,
    pub ratio_estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McReport {
    pub exponent: u32,
    pub samples: usize,
    pub failures: usize,
    pub rows: Vec<McRow>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
struct BatchSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    ok: usize,
    failures: usize,
}

fn run_batch(exp: &ContractionExperiment, batch: usize) -> BatchSums {
    let m = exp.t_grid.len();
    let mut out = BatchSums { sum: vec![0.0; m], sum_sq: vec![0.0; m], ok: 0, failures: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
    rng.set_stream(batch as u64);
    let count = BATCH.min(exp.samples - batch * BATCH);
    for _ in 0..count {
        let x = exp.set.sample(&mut rng);
        match jacobian_dets(&exp.model, &x, &exp.center, &exp.t_grid, FD_STEP) {
            Ok(dets) if dets.iter().all(|d| d.is_finite()) => {
                for (k, d) in dets.iter().enumerate() {
                    out.sum[k] += d;
                    out.sum_sq[k] += d * d;
                }
                out.ok += 1;
            }
            _ => out.failures += 1,
        }
    }
    out
}

/// Monte Carlo estimate of `vol(phi_t(U)) / vol(U)` as the mean of
/// `det(d phi_t)` over uniform points of `U`, checked against `(1-t)^N`
/// with a margin of three standard errors.
///
/// The result depends only on the seed and sample count, never on the
/// executor or thread count.
pub fn mc_contraction(exp: &ContractionExperiment, exponent: u32, exec: Exec) -> Result<McReport> {
    if exp.samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    if exp.t_grid.iter().any(|t| !(0.0..1.0).contains(t)) {
        return Err(Error::InvalidParameter("contraction times must lie in [0, 1)".into()));
    }
    let batches = exp.samples.div_ceil(BATCH);
    let parts = exec.map_range(batches, |b| run_batch(exp, b));
    let m = exp.t_grid.len();
    let (mut sum, mut sum_sq, mut ok, mut failures) = (vec![0.0; m], vec![0.0; m], 0usize, 0usize);
    for p in &parts {
        for k in 0..m {
            sum[k] += p.sum[k];
            sum_sq[k] += p.sum_sq[k];
        }
        ok += p.ok;
        failures += p.failures;
    }
    if failures * 100 > exp.samples {
        return Err(Error::SampleFailures(failures));
    }
    let nf = ok as f64;
    let rows: Vec<McRow> = exp
        .t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mean = sum[k] / nf;
            let var = if ok > 1 { ((sum_sq[k] - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
            let stderr = (var / nf).sqrt();
            let bound = (1.0 - t).powi(exponent as i32);
            McRow { t, ratio_estimate: mean, stderr, bound, slack: mean + 3.0 * stderr - bound }
        })
        .collect();
    let pass = rows.iter().all(|r| r.slack >= 0.0);
    Ok(McReport { exponent, samples: exp.samples, failures, rows, pass })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianRow {
    pub point: DVector<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianReport {
    pub rows: Vec<LaplacianRow>,
    pub skipped: usize,
    pub max_value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Horizontal Laplacian of `d^2(center, .)` at `x`, as `-2` times the
/// Laplacian of `f_0 = -d^2/2` read off the Riccati solution at `t = 0`.
pub fn laplacian_d2(model: &SasakianModel, x: &DVector<f64>, center: &DVector<f64>) -> Result<f64> {
    let inv = near_conjugate(model, x, center)?;
    let coeffs = riccati::build_coefficients(inv, model.n, CurvatureProfile::Flat, model.epsilon)?;
    let s0 = riccati::initial_hessian(&coeffs)?
        .ok_or_else(|| Error::Shooting("Riccati solution is singular at the start point".into()))?;
    Ok(-2.0 * riccati::horizontal_laplacian(&s0, model.epsilon))
}

/// Checks `Delta_H d^2 <= 2N + tol` at each point. Points that are too close
/// to the cut locus are skipped and counted.
pub fn laplacian_comparison_check(
    model: &SasakianModel,
    points: &[DVector<f64>],
    center: &DVector<f64>,
    exponent: u32,
    tol: f64,
    exec: Exec,
) -> LaplacianReport {
    let values = exec.map(points, |p| laplacian_d2(model, p, center).ok());
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (p, v) in points.iter().zip(values) {
        match v {
            Some(value) => rows.push(LaplacianRow { point: p.clone(), value }),
            None => skipped += 1,
        }
    }
    let max_value = rows.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    let bound = 2.0 * exponent as f64;
    LaplacianReport { pass: !rows.is_empty() && max_value <= bound + tol, rows, skipped, max_value, bound }
}

/// Heisenberg dilation `(x, y, z) -> (l x, l y, l^2 z)`.
pub fn dilate(x: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let d = x.len();
    DVector::from_fn(d, |i, _| if i + 1 == d { lambda * lambda * x[i] } else { lambda * x[i] })
}
