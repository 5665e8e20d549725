//! Matrix Riccati systems along Heisenberg geodesics.
//!
//! `S(t)` is the Hessian of `f_t` in the moving frame and satisfies
//! `S' = U S + S U^T - R(t) - E - S D S` with `S^{-1} -> 0` at `t = 1`.
//! With `T(t) = -S(1-t)^{-1}` this becomes
//! `T' = T U + U^T T + T (R(1-t) + E) T + D`, `T(0) = 0`.
//!
//! The quadratic equation is not integrated directly. Writing `T = Y X^{-1}`
//! gives the linear system
//!
//! ```text
//! X' = -U X - M Y,   Y' = U^T Y + D X,   X(0) = I, Y(0) = 0,   M = R(1-t) + E
//! ```
//!
//! which stays regular where `S` is singular. `S(1-t) = -X Y^{-1}`.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{Error, Result};
use crate::geodesics::GeodesicInvariants;
use crate::models::{CurvatureProfile, Epsilon};
use crate::ode;
use crate::quad;

/// Largest internal step of the linear flow.
const MAX_STEP: f64 = 1.0 / 64.0;

/// Condition-number cap for matrix inversion.
pub const COND_LIMIT: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct RiccatiCoefficients {
    pub n: usize,
    pub inv: GeodesicInvariants,
    pub variant: Epsilon,
    pub u: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub j_lower: DMatrix<f64>,
    pub profile: CurvatureProfile,
}

/// `J_{2n-2} = [[0,1],[-1,0]] (+) ...`.
pub fn j_lower(n: usize) -> DMatrix<f64> {
    let m = 2 * n - 2;
    let mut j = DMatrix::zeros(m, m);
    for k in (0..m).step_by(2) {
        j[(k, k + 1)] = 1.0;
        j[(k + 1, k)] = -1.0;
    }
    j
}

pub fn build_coefficients(
    inv: GeodesicInvariants,
    n: usize,
    profile: CurvatureProfile,
    variant: Epsilon,
) -> Result<RiccatiCoefficients> {
    if !(inv.a > 0.0) {
        return Err(Error::VerticalOnly);
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let (a, b) = (inv.a, inv.b);
    let dim = 2 * n + 1;
    let jl = j_lower(n);
    let mut u = DMatrix::zeros(dim, dim);
    let mut e = DMatrix::zeros(dim, dim);
    let mut d = DMatrix::identity(dim, dim);
    u[(0, 2)] = -a / 2.0;
    u[(1, 2)] = b / 2.0;
    u[(2, 1)] = -b / 2.0;
    e[(0, 0)] = a * a / 4.0;
    e[(0, 1)] = -a * b / 4.0;
    e[(1, 0)] = -a * b / 4.0;
    e[(1, 1)] = b * b / 4.0;
    for i in 3..dim {
        e[(i, i)] = b * b / 4.0;
    }
    let lower_rot = match variant {
        Epsilon::Sub => {
            u[(2, 0)] = a;
            e[(2, 2)] = -a * a + b * b / 4.0;
            d[(0, 0)] = 0.0;
            -b / 2.0
        }
        Epsilon::Value(eps) => {
            let e2 = eps * eps;
            u[(2, 0)] = -(1.0 - 2.0 * e2) * a / (2.0 * e2);
            e[(2, 2)] = b * b / 4.0 - a * a + a * a / (4.0 * e2);
            d[(0, 0)] = 1.0 / e2;
            (1.0 - e2) * b / (2.0 * e2)
        }
    };
    if n > 1 {
        u.view_mut((3, 3), (2 * n - 2, 2 * n - 2)).copy_from(&(&jl * lower_rot));
    }
    Ok(RiccatiCoefficients { n, inv, variant, u, e, d, j_lower: jl, profile })
}

impl RiccatiCoefficients {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// `R(1 - t) + E`, the quadratic coefficient of the `T` equation at time `t`.
    pub fn quadratic(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.profile.matrix(self.dim(), self.inv.a, 1.0 - t)? + &self.e)
    }

    /// Right side of the `T` equation.
    pub fn t_rhs(&self, t: f64, tm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let m = self.quadratic(t)?;
        Ok(tm * &self.u + self.u.transpose() * tm + tm * m * tm + &self.d)
    }

    /// Right side of the `S` equation at forward time `s`.
    pub fn s_rhs(&self, s: f64, sm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let r = self.profile.matrix(self.dim(), self.inv.a, s)?;
        Ok(&self.u * sm + sm * self.u.transpose() - r - &self.e - sm * &self.d * sm)
    }
}

/// Time-sampled symmetric matrices. Samples that could not be computed
/// (near-conjugate inversions) are `None`.
#[derive(Clone, Debug, Default)]
pub struct MatrixTrajectory {
    pub times: Vec<f64>,
    pub matrices: Vec<Option<DMatrix<f64>>>,
}

impl MatrixTrajectory {
    pub fn valid(&self) -> impl Iterator<Item = (f64, &DMatrix<f64>)> {
        self.times.iter().zip(&self.matrices).filter_map(|(t, m)| m.as_ref().map(|m| (*t, m)))
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.valid().map(|(_, m)| (m - m.transpose()).amax()).fold(0.0, f64::max)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `a * b^{-1}` when `b` is well conditioned.
fn right_divide(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sv = b.clone().svd(false, false).singular_values;
    let (mx, mn) = (sv.max(), sv.min());
    if !(mn > 0.0) || mx / mn > COND_LIMIT {
        return None;
    }
    let inv = b.clone().try_inverse()?;
    Some(a * inv)
}

/// Samples `(X, Y)` of the linear flow at increasing `taus` (starting at or after 0).
pub fn linear_flow(coeffs: &RiccatiCoefficients, taus: &[f64]) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let d = coeffs.dim();
    let dd = d * d;
    let constant_m = match coeffs.profile {
        CurvatureProfile::Custom(_) => None,
        _ => Some(coeffs.quadratic(0.0)?),
    };
    let ut = coeffs.u.transpose();
    let custom_err = std::cell::RefCell::new(None);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let owned;
        let m = match &constant_m {
            Some(m) => m,
            None => match coeffs.quadratic(t) {
                Ok(m) => {
                    owned = m;
                    &owned
                }
                Err(e) => {
                    *custom_err.borrow_mut() = Some(e);
                    dy.fill(f64::NAN);
                    return;
                }
            },
        };
        let x = DMatrixView::from_slice(&y[..dd], d, d);
        let yy = DMatrixView::from_slice(&y[dd..], d, d);
        let (dx, dyy) = dy.split_at_mut(dd);
        let mut dx = DMatrixViewMut::from_slice(dx, d, d);
        dx.gemm(-1.0, &coeffs.u, &x, 0.0);
        dx.gemm(-1.0, m, &yy, 1.0);
        let mut dyy = DMatrixViewMut::from_slice(dyy, d, d);
        dyy.gemm(1.0, &ut, &yy, 0.0);
        dyy.gemm(1.0, &coeffs.d, &x, 1.0);
    };
    let mut state = vec![0.0; 2 * dd];
    for i in 0..d {
        state[i * d + i] = 1.0;
    }
    let mut t = 0.0;
    let mut out = Vec::with_capacity(taus.len());
    for &target in taus {
        if target < t {
            return Err(Error::InvalidParameter("flow times must increase from 0".into()));
        }
        if target > t {
            let steps = ((target - t) / MAX_STEP).ceil().max(1.0) as usize;
            state = ode::integrate(&rhs, t, &state, target, steps, |_, _, _| {}).map_err(|e| {
                custom_err.borrow_mut().take().unwrap_or(e)
            })?;
            t = target;
        }
        out.push((
            DMatrix::from_column_slice(d, d, &state[..dd]),
            DMatrix::from_column_slice(d, d, &state[dd..]),
        ));
    }
    Ok(out)
}

/// `T(t)` on an increasing grid starting at 0.
pub fn propagate_t(coeffs: &RiccatiCoefficients, t_grid: &[f64]) -> Result<MatrixTrajectory> {
    if t_grid.first().copied() != Some(0.0) {
        return Err(Error::InvalidParameter("T grid must start at 0".into()));
    }
    let flow = linear_flow(coeffs, t_grid)?;
    let mut traj = MatrixTrajectory::default();
    for (k, (t, (x, y))) in t_grid.iter().zip(flow).enumerate() {
        let tm = right_divide(&y, &x).map(symmetrize);
        if tm.as_ref().is_none_or(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::BlowUp { step: k, t: *t });
        }
        traj.times.push(*t);
        traj.matrices.push(tm);
    }
    Ok(traj)
}

/// `S(1 - t) = -T(t)^{-1}`, reported against the forward time `s = 1 - t`
/// (in increasing order). Ill-conditioned samples are omitted.
pub fn recover_s(traj_t: &MatrixTrajectory) -> MatrixTrajectory {
    let mut out = MatrixTrajectory::default();
    for (t, m) in traj_t.times.iter().zip(&traj_t.matrices).rev() {
        let s = m.as_ref().and_then(|m| right_divide(&(-DMatrix::identity(m.nrows(), m.ncols())), m)).map(symmetrize);
        out.times.push(1.0 - t);
        out.matrices.push(s);
    }
    out
}

/// `S(s)` on an increasing grid of forward times in `[0, 1)`, computed as
/// `-X Y^{-1}` from the linear flow.
pub fn solve_s(coeffs: &RiccatiCoefficients, s_grid: &[f64]) -> Result<MatrixTrajectory> {
    if s_grid.iter().any(|&s| !(0.0..1.0).contains(&s)) {
        return Err(Error::InvalidParameter("S is only defined on [0, 1)".into()));
    }
    let taus: Vec<f64> = s_grid.iter().rev().map(|s| 1.0 - s).collect();
    let flow = linear_flow(coeffs, &taus)?;
    let mut out = MatrixTrajectory { times: s_grid.to_vec(), matrices: Vec::with_capacity(s_grid.len()) };
    for (x, y) in flow.into_iter().rev() {
        out.matrices.push(right_divide(&(-x), &y).map(symmetrize));
    }
    Ok(out)
}

/// Horizontal (sub-)Laplacian of `f` from its frame Hessian.
pub fn horizontal_laplacian(s: &DMatrix<f64>, variant: Epsilon) -> f64 {
    let tail: f64 = (1..s.nrows()).map(|i| s[(i, i)]).sum();
    match variant {
        Epsilon::Sub => tail,
        Epsilon::Value(e) => tail + s[(0, 0)] / (e * e),
    }
}

#[derive(Clone, Debug)]
pub struct AsymptoticSeed {
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
    pub t3: DMatrix<f64>,
}

impl AsymptoticSeed {
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        &self.t1 * t + &self.t2 * (t * t) + &self.t3 * (t * t * t)
    }
}

/// First three Taylor coefficients of `T` at `t = 0`.
pub fn asymptotic_seed(coeffs: &RiccatiCoefficients) -> Result<AsymptoticSeed> {
    let u = &coeffs.u;
    let ut = u.transpose();
    let t1 = coeffs.d.clone();
    let t2 = (&t1 * u + &ut * &t1) * 0.5;
    let t3 = (&t2 * u + &ut * &t2 + &t1 * coeffs.quadratic(0.0)? * &t1) / 3.0;
    Ok(AsymptoticSeed { t1, t2, t3 })
}

/// Log-log slope of `|T(t) - seed(t)|` fitted on `points` log-spaced times
/// in `[1e-3, 1e-1]`.
pub fn seed_error_slope(coeffs: &RiccatiCoefficients, points: usize) -> Result<f64> {
    let seed = asymptotic_seed(coeffs)?;
    let mut grid = vec![0.0];
    grid.extend((0..points).map(|k| 10f64.powf(-3.0 + 2.0 * k as f64 / (points - 1) as f64)));
    let tr = propagate_t(coeffs, &grid)?;
    let pts: Vec<(f64, f64)> = tr
        .valid()
        .skip(1)
        .map(|(t, m)| (t.ln(), (m - seed.eval(t)).norm().ln()))
        .collect();
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    Ok(num / den)
}

/// `det(d phi_t)` on a uniform grid over `[0, t_max]`.
#[derive(Clone, Debug)]
pub struct VolumeDistortion {
    pub times: Vec<f64>,
    /// Integrated Laplacian (log of the determinant) at each grid time.
    pub log_det: Vec<f64>,
    /// Richardson error estimate of the final log-determinant.
    pub error_estimate: f64,
}

/// Composite Simpson of the horizontal Laplacian of a uniformly sampled `S`
/// trajectory starting at 0, with a Richardson check against the half grid.
pub fn volume_distortion(s_traj: &MatrixTrajectory, variant: Epsilon, tol: f64) -> Result<VolumeDistortion> {
    let n = s_traj.times.len();
    if n < 5 || !(n - 1).is_multiple_of(4) {
        return Err(Error::InvalidParameter("volume_distortion needs 4k+1 uniform samples".into()));
    }
    let h = s_traj.times[1] - s_traj.times[0];
    let lap: Vec<f64> = s_traj
        .matrices
        .iter()
        .map(|m| m.as_ref().map_or(f64::NAN, |m| horizontal_laplacian(m, variant)))
        .collect();
    if lap.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("S trajectory has near-conjugate samples".into()));
    }
    let fine = quad::simpson(&lap, h);
    let coarse_vals: Vec<f64> = lap.iter().step_by(2).copied().collect();
    let coarse = quad::simpson(&coarse_vals, 2.0 * h);
    let estimate = (fine - coarse).abs() / 15.0;
    if estimate > tol {
        return Err(Error::CoarseGrid { estimate, tol });
    }
    Ok(VolumeDistortion { times: s_traj.times.clone(), log_det: quad::simpson_cumulative(&lap, h), error_estimate: estimate })
}

/// `det(d phi_t)` at each requested `t` (all in `[0, 1)`).
///
/// The requested times are grid nodes: each gap between consecutive times
/// gets its own uniform Simpson grid, about `4 * quarter` intervals per unit
/// of the largest time.
pub fn determinant(coeffs: &RiccatiCoefficients, ts: &[f64], quarter: usize, tol: f64) -> Result<Vec<f64>> {
    let mut knots: Vec<f64> = ts.to_vec();
    knots.push(0.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let t_max = *knots.last().unwrap();
    if t_max == 0.0 {
        return Ok(vec![1.0; ts.len()]);
    }
    let mut grid = vec![0.0];
    let mut segments = Vec::with_capacity(knots.len() - 1);
    for w in knots.windows(2) {
        let m = 4 * ((quarter as f64 * (w[1] - w[0]) / t_max).ceil() as usize).max(1);
        let start = grid.len() - 1;
        grid.extend((1..=m).map(|k| if k == m { w[1] } else { w[0] + (w[1] - w[0]) * k as f64 / m as f64 }));
        segments.push((start, start + m));
    }
    let s = solve_s(coeffs, &grid)?;
    let mut log_det = vec![0.0];
    let mut estimate = 0.0;
    for (lo, hi) in segments {
        let part = MatrixTrajectory { times: s.times[lo..=hi].to_vec(), matrices: s.matrices[lo..=hi].to_vec() };
        let vd = volume_distortion(&part, coeffs.variant, f64::INFINITY)?;
        estimate += vd.error_estimate;
        log_det.push(log_det.last().unwrap() + vd.log_det.last().unwrap());
    }
    if estimate > tol {
        return Err(Error::CoarseGrid { estimate, tol });
    }
    Ok(ts
        .iter()
        .map(|t| {
            let k = knots.binary_search_by(|x| x.total_cmp(t)).unwrap();
            log_det[k].exp()
        })
        .collect())
}

/// Slack of `S_22(s) >= -1/(1-s)`, where `S_22` is the gradient-direction entry.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub min_slack: f64,
    pub t_worst: f64,
    pub samples: usize,
}

pub fn s22_lower_bound_check(s_traj: &MatrixTrajectory, tol: f64) -> Result<BoundReport> {
    let mut r = BoundReport { min_slack: f64::INFINITY, t_worst: f64::NAN, samples: 0 };
    for (s, m) in s_traj.valid() {
        let slack = m[(1, 1)] + 1.0 / (1.0 - s);
        r.samples += 1;
        if slack < r.min_slack {
            r.min_slack = slack;
            r.t_worst = s;
        }
    }
    if r.min_slack < -tol {
        return Err(Error::Residual { what: format!("S22 lower bound at t = {}", r.t_worst), residual: -r.min_slack, tol });
    }
    Ok(r)
}

/// `S(0)` for the geodesic, i.e. the Hessian of `f_0 = -d^2/2` at the start point.
pub fn initial_hessian(coeffs: &RiccatiCoefficients) -> Result<Option<DMatrix<f64>>> {
    Ok(solve_s(coeffs, &[0.0])?.matrices.pop().flatten())
}
