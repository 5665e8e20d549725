//! Hamiltonian geodesic flow on Heisenberg models.
//!
//! States carry canonical coordinate momenta `(p_x, p_y, p_z)`. The frame
//! components of the momentum are `h_X = p_x - y p_z / 2`,
//! `h_Y = p_y + x p_z / 2` and `p_V = p_z`, and
//! `H = 1/2 |h|^2 + s p_z^2 / 2` with `s = 0` (sub-Riemannian) or `1/eps^2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{Epsilon, SasakianModel};
use crate::ode;

/// Angle below which the closed form switches to its Taylor series.
pub const SMALL_ANGLE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicState {
    /// `(x_1..x_n, y_1..y_n, z)`.
    pub q: DVector<f64>,
    /// `(p_x1..p_xn, p_y1..p_yn, p_z)`.
    pub p: DVector<f64>,
    pub t: f64,
}

impl GeodesicState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        Self { q, p, t: 0.0 }
    }

    /// State at `q` with the given frame components `(h_X, h_Y, p_V)`.
    pub fn from_frame(q: DVector<f64>, h: &DVector<f64>) -> Self {
        let n = (q.len() - 1) / 2;
        let pz = h[2 * n];
        let mut p = h.clone();
        for i in 0..n {
            p[i] = h[i] + 0.5 * q[n + i] * pz;
            p[n + i] = h[n + i] - 0.5 * q[i] * pz;
        }
        Self::new(q, p)
    }

    /// Momentum components in the dual frame.
    pub fn frame_momentum(&self) -> DVector<f64> {
        let n = (self.q.len() - 1) / 2;
        let pz = self.p[2 * n];
        let mut h = self.p.clone();
        for i in 0..n {
            h[i] = self.p[i] - 0.5 * self.q[n + i] * pz;
            h[n + i] = self.p[n + i] + 0.5 * self.q[i] * pz;
        }
        h
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicInvariants {
    /// Horizontal speed `|h|`.
    pub a: f64,
    /// Vertical momentum `p_V`.
    pub b: f64,
}

pub fn hamiltonian(model: &SasakianModel, state: &GeodesicState) -> f64 {
    let h = state.frame_momentum();
    let n = model.n;
    let hor: f64 = (0..2 * n).map(|i| h[i] * h[i]).sum();
    0.5 * (hor + model.epsilon.vertical_weight() * h[2 * n] * h[2 * n])
}

pub fn invariants(model: &SasakianModel, state: &GeodesicState) -> GeodesicInvariants {
    let h = state.frame_momentum();
    let n = model.n;
    GeodesicInvariants { a: (0..2 * n).map(|i| h[i] * h[i]).sum::<f64>().sqrt(), b: h[2 * n] }
}

/// Right-hand side of Hamilton's equations on the packed state `(q, p)`.
pub fn hamilton_rhs(model: &SasakianModel, y: &[f64], dy: &mut [f64]) {
    let n = model.n;
    let d = 2 * n + 1;
    let s = model.epsilon.vertical_weight();
    let (q, p) = y.split_at(d);
    let pz = p[2 * n];
    let mut zdot = s * pz;
    for i in 0..n {
        let (x, yy) = (q[i], q[n + i]);
        let hx = p[i] - 0.5 * yy * pz;
        let hy = p[n + i] + 0.5 * x * pz;
        dy[i] = hx;
        dy[n + i] = hy;
        zdot += 0.5 * (x * hy - yy * hx);
        dy[d + i] = -0.5 * hy * pz;
        dy[d + n + i] = 0.5 * hx * pz;
    }
    dy[2 * n] = zdot;
    dy[d + 2 * n] = 0.0;
}

/// Fixed-step integration of the geodesic flow; returns `steps + 1` states.
pub fn integrate(model: &SasakianModel, start: &GeodesicState, t_end: f64, steps: usize) -> Result<Vec<GeodesicState>> {
    let d = model.dim();
    let mut y0 = start.q.as_slice().to_vec();
    y0.extend_from_slice(start.p.as_slice());
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| hamilton_rhs(model, y, dy);
    let mut out = Vec::with_capacity(steps + 1);
    ode::integrate(&f, start.t, &y0, start.t + t_end, steps, |_, t, y| {
        out.push(GeodesicState {
            q: DVector::from_column_slice(&y[..d]),
            p: DVector::from_column_slice(&y[d..]),
            t,
        });
    })?;
    Ok(out)
}

/// `(e^{i th t} - 1) / (i th)` and `(th t - sin th t) / th^2`.
fn arc_factors(theta: f64, t: f64) -> (Complex64, f64) {
    let x = theta * t;
    if x.abs() < SMALL_ANGLE {
        let e = Complex64::new(1.0 - x * x / 6.0, x / 2.0 - x * x * x / 24.0) * t;
        let q = theta * t.powi(3) / 6.0 - theta.powi(3) * t.powi(5) / 120.0;
        (e, q)
    } else {
        let e = (Complex64::new(0.0, x).exp() - 1.0) / Complex64::new(0.0, theta);
        (e, (x - x.sin()) / (theta * theta))
    }
}

/// Closed-form geodesic state at time `t` starting from `start` (any epsilon).
pub fn exponential_state(model: &SasakianModel, start: &GeodesicState, t: f64) -> GeodesicState {
    let n = model.n;
    let s = model.epsilon.vertical_weight();
    let h = start.frame_momentum();
    let theta = h[2 * n];
    let (e, area) = arc_factors(theta, t);
    let rot = Complex64::new(0.0, theta * t).exp();
    let mut q = start.q.clone();
    let mut hnew = h.clone();
    let mut z = start.q[2 * n];
    let mut speed2 = 0.0;
    for i in 0..n {
        let w0 = Complex64::new(start.q[i], start.q[n + i]);
        let u = Complex64::new(h[i], h[n + i]);
        let w = w0 + u * e;
        q[i] = w.re;
        q[n + i] = w.im;
        z += 0.5 * (w0.conj() * w).im;
        speed2 += u.norm_sqr();
        let ur = u * rot;
        hnew[i] = ur.re;
        hnew[n + i] = ur.im;
    }
    q[2 * n] = z + 0.5 * speed2 * area + s * theta * t;
    let mut st = GeodesicState::from_frame(q, &hnew);
    st.t = start.t + t;
    st
}

/// Closed-form Heisenberg geodesic from the origin with frame covector `covector`.
pub fn heisenberg_exponential(n: usize, covector: &DVector<f64>, t: f64) -> DVector<f64> {
    let model = SasakianModel { n, epsilon: Epsilon::Sub };
    let start = GeodesicState::new(DVector::zeros(2 * n + 1), covector.clone());
    exponential_state(&model, &start, t).q
}

/// `mu(th) = (th - sin th) / (4 (1 - cos th))` and its derivative.
fn mu(theta: f64) -> (f64, f64) {
    if theta.abs() < 1e-3 {
        let t2 = theta * theta;
        (theta / 12.0 + theta * t2 / 360.0, 1.0 / 12.0 + t2 / 120.0)
    } else {
        let (s, c) = theta.sin_cos();
        let num = theta - s;
        let den = 1.0 - c;
        (num / (4.0 * den), (den * den - num * s) / (4.0 * den * den))
    }
}

/// Covector at `x` whose geodesic reaches `target` at time 1, on the branch
/// with `|p_V| < 2 pi`.
pub fn shoot(model: &SasakianModel, x: &DVector<f64>, target: &DVector<f64>) -> Result<GeodesicState> {
    let n = model.n;
    let s = model.epsilon.vertical_weight();
    let rel = model.group_mul(&model.group_inv(x), target);
    let w: Vec<Complex64> = (0..n).map(|i| Complex64::new(rel[i], rel[n + i])).collect();
    let w2: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    let z = rel[2 * n];
    if w2 == 0.0 {
        return Err(Error::Shooting("target lies on the vertical line through the start".into()));
    }
    let f = |th: f64| {
        let (m, dm) = mu(th);
        (w2 * m + s * th - z, w2 * dm + s)
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mut lo, mut hi) = (-two_pi, two_pi);
    let mut th = (z / (w2 / 12.0 + s)).clamp(-3.0, 3.0);
    for _ in 0..200 {
        let (g, dg) = f(th);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            hi = th;
        } else {
            lo = th;
        }
        let mut next = th - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - th).abs() <= 1e-15 * (1.0 + th.abs()) {
            th = next;
            break;
        }
        th = next;
    }
    if th.abs() >= two_pi {
        return Err(Error::Shooting(format!("no solution below the conjugate angle (theta = {th})")));
    }
    let factor = if th.abs() < SMALL_ANGLE {
        Complex64::new(1.0 - th * th / 12.0, -th / 2.0)
    } else {
        Complex64::new(0.0, th) / (Complex64::new(0.0, th).exp() - 1.0)
    };
    let mut h = DVector::zeros(2 * n + 1);
    for i in 0..n {
        let u = w[i] * factor;
        h[i] = u.re;
        h[n + i] = u.im;
    }
    h[2 * n] = th;
    Ok(GeodesicState::from_frame(x.clone(), &h))
}

/// Skew matrix `W` of the moving-frame equations.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatrixW {
    pub w: DMatrix<f64>,
    pub variant: Epsilon,
}

pub fn frame_matrix(inv: GeodesicInvariants, n: usize, variant: Epsilon) -> Result<FrameMatrixW> {
    if inv.a <= 0.0 {
        return Err(Error::VerticalOnly);
    }
    let d = 2 * n + 1;
    let mut w = DMatrix::zeros(d, d);
    w[(0, 2)] = -inv.a / 2.0;
    w[(2, 0)] = inv.a / 2.0;
    let w12 = match variant {
        Epsilon::Sub => inv.b,
        Epsilon::Value(e) => -(1.0 / (2.0 * e * e) - 1.0) * inv.b,
    };
    w[(1, 2)] = w12;
    w[(2, 1)] = -w12;
    Ok(FrameMatrixW { w, variant })
}

/// Maximum deviation between the trajectory velocity (4th-order central
/// differences) and the raised momentum `F(q) (h, s p_V)`.
pub fn velocity_residual(model: &SasakianModel, traj: &[GeodesicState]) -> f64 {
    let s = model.epsilon.vertical_weight();
    let mut worst: f64 = 0.0;
    for k in 2..traj.len().saturating_sub(2) {
        let dt = traj[k + 1].t - traj[k].t;
        let fd = (&traj[k - 2].q - &traj[k - 1].q * 8.0 + &traj[k + 1].q * 8.0 - &traj[k + 2].q) / (12.0 * dt);
        let mut h = traj[k].frame_momentum();
        let n = model.n;
        h[2 * n] *= s;
        let raised = model.frame_coords(&traj[k].q) * h;
        worst = worst.max((fd - raised).amax());
    }
    worst
}

/// Maximum deviation of the covariant acceleration from `p_V J (velocity)`,
/// using the Levi-Civita connection of the unit-Reeb metric.
pub fn acceleration_residual(model: &SasakianModel, traj: &[GeodesicState]) -> f64 {
    let lc = crate::models::connection(model);
    let j = model.j_matrix();
    let n = model.n;
    let frame_velocity = |st: &GeodesicState| {
        let mut h = st.frame_momentum();
        h[2 * n] *= model.epsilon.vertical_weight();
        h
    };
    let mut worst: f64 = 0.0;
    for k in 2..traj.len().saturating_sub(2) {
        let dt = traj[k + 1].t - traj[k].t;
        let c: Vec<DVector<f64>> = (k - 2..=k + 2).map(|i| frame_velocity(&traj[i])).collect();
        let cdot = (&c[0] - &c[1] * 8.0 + &c[3] * 8.0 - &c[4]) / (12.0 * dt);
        let acc = cdot + lc.cov(&c[2], &c[2]);
        let b = traj[k].frame_momentum()[2 * n];
        worst = worst.max((acc - (&j * &c[2]) * b).amax());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_heisenberg;

    fn sub(n: usize) -> SasakianModel {
        build_heisenberg(n, Epsilon::Sub).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let m = sub(1);
        let st = GeodesicState::new(DVector::zeros(3), DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert_eq!(hamiltonian(&m, &st), 0.5);
        let vert = GeodesicState::new(DVector::zeros(3), DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert_eq!(hamiltonian(&m, &vert), 0.0);
        let me = build_heisenberg(1, Epsilon::Value(0.5)).unwrap();
        assert_eq!(hamiltonian(&me, &vert), 2.0);
    }

    #[test]
    fn invariants_from_frame_components() {
        let m = sub(1);
        let st = GeodesicState::new(DVector::zeros(3), DVector::from_vec(vec![3.0, 4.0, 2.0]));
        let inv = invariants(&m, &st);
        assert_eq!((inv.a, inv.b), (5.0, 2.0));
    }

    #[test]
    fn zero_momentum_is_constant() {
        let m = sub(1);
        let q = DVector::from_vec(vec![0.3, 0.1, -0.2]);
        let traj = integrate(&m, &GeodesicState::new(q.clone(), DVector::zeros(3)), 1.0, 10).unwrap();
        assert!(traj.iter().all(|s| s.q == q));
    }

    #[test]
    fn straight_line_and_full_circle() {
        let p = heisenberg_exponential(1, &DVector::from_vec(vec![1.0, 0.0, 0.0]), 0.7);
        assert!((p[0] - 0.7).abs() < 1e-15 && p[1] == 0.0 && p[2] == 0.0);
        assert_eq!(heisenberg_exponential(1, &DVector::from_vec(vec![1.0, 2.0, 3.0]), 0.0), DVector::zeros(3));
        let two_pi = 2.0 * std::f64::consts::PI;
        let p = heisenberg_exponential(1, &DVector::from_vec(vec![1.0, 0.0, two_pi]), 1.0);
        assert!(p[0].abs() < 1e-15 && p[1].abs() < 1e-15);
        // disc of radius 1/(2 pi)
        assert!((p[2] - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn series_agrees_with_direct_formula() {
        // both branches are accurate at |theta t| = 1e-3
        let (theta, t) = (1.25e-3, 0.8);
        let x: f64 = theta * t;
        let e = (Complex64::new(0.0, x).exp() - 1.0) / Complex64::new(0.0, theta);
        let x3 = theta * t.powi(3) / 6.0;
        let e_series = Complex64::new(1.0 - x * x / 6.0, x / 2.0 - x * x * x / 24.0) * t;
        assert!((e - e_series).norm() < 1e-13);
        assert!(((x - x.sin()) / (theta * theta) - (x3 - theta.powi(3) * t.powi(5) / 120.0)).abs() < 1e-12);
    }

    #[test]
    fn mu_series_matches_direct() {
        let th: f64 = 0.9e-3;
        let direct = (th - th.sin()) / (4.0 * (1.0 - th.cos()));
        assert!((mu(th).0 - direct).abs() < 1e-12);
        let th2: f64 = 1.1e-3;
        let d2 = (th2 - th2.sin()) / (4.0 * (1.0 - th2.cos()));
        assert!((mu(th2).0 - d2).abs() < 1e-12);
    }

    #[test]
    fn shooting_hits_target() {
        for eps in [Epsilon::Sub, Epsilon::Value(0.5), Epsilon::Value(2.0)] {
            let m = build_heisenberg(2, eps).unwrap();
            let x = DVector::from_vec(vec![0.3, -1.0, 0.5, 0.2, 0.7]);
            let target = DVector::from_vec(vec![-0.4, 0.1, 0.9, -0.3, -1.5]);
            let st = shoot(&m, &x, &target).unwrap();
            let end = exponential_state(&m, &st, 1.0);
            assert!((end.q - target).amax() < 1e-12, "{eps:?}");
        }
    }

    #[test]
    fn shooting_rejects_vertical_targets() {
        let m = sub(1);
        let x = DVector::from_vec(vec![0.3, 0.2, 0.0]);
        let t = DVector::from_vec(vec![0.3, 0.2, 1.0]);
        assert!(shoot(&m, &x, &t).is_err());
    }

    #[test]
    fn frame_matrix_examples() {
        let w = frame_matrix(GeodesicInvariants { a: 1.0, b: 0.0 }, 1, Epsilon::Sub).unwrap().w;
        assert_eq!((w[(0, 2)], w[(2, 0)], w[(1, 2)]), (-0.5, 0.5, 0.0));
        let w = frame_matrix(GeodesicInvariants { a: 2.0, b: 1.0 }, 1, Epsilon::Value(1.0)).unwrap().w;
        assert_eq!(w[(1, 2)], 0.5);
        assert!((&w + w.transpose()).amax() == 0.0);
        assert!(matches!(frame_matrix(GeodesicInvariants { a: 0.0, b: 1.0 }, 1, Epsilon::Sub), Err(Error::VerticalOnly)));
    }

    #[test]
    fn integrator_matches_closed_form() {
        for eps in [Epsilon::Sub, Epsilon::Value(0.7)] {
            let m = build_heisenberg(1, eps).unwrap();
            let st = GeodesicState::new(DVector::from_vec(vec![0.2, -0.1, 0.3]), DVector::from_vec(vec![1.0, 0.5, 2.0]));
            let traj = integrate(&m, &st, 1.0, 200).unwrap();
            for s in &traj {
                let exact = exponential_state(&m, &st, s.t);
                assert!((&s.q - exact.q).amax() < 1e-11);
                assert!((&s.p - exact.p).amax() < 1e-11);
            }
        }
    }

    #[test]
    fn trajectory_identities() {
        let m = sub(1);
        let st = GeodesicState::new(DVector::from_vec(vec![0.2, -0.1, 0.3]), DVector::from_vec(vec![1.0, 0.0, 1.0]));
        let traj = integrate(&m, &st, 1.0, 1000).unwrap();
        let h0 = hamiltonian(&m, &st);
        assert!(traj.iter().all(|s| (hamiltonian(&m, s) - h0).abs() < 1e-10 * h0));
        assert!(velocity_residual(&m, &traj) < 1e-9);
        assert!(acceleration_residual(&m, &traj) < 1e-8);
    }

    #[test]
    fn blow_up_is_reported() {
        let m = sub(1);
        let st = GeodesicState::new(DVector::from_vec(vec![f64::NAN, 0.0, 0.0]), DVector::from_vec(vec![1.0, 0.0, 1.0]));
        assert!(matches!(integrate(&m, &st, 1.0, 5), Err(Error::BlowUp { step: 1, .. })));
    }
}
