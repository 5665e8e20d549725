//! Closed-form comparison solutions of the reduced 2x2 Riccati systems.
//!
//! * [`S0Solution`] bounds the reduced Hessian `Sbar` in the sub-Riemannian case.
//! * [`SrEps`] bounds the rescaled `Shat` in the Riemannian extensions.
//! * [`SrTrig`] is the comparison solution under a positive curvature bound; it
//!   blows up before `t = 1` when the geodesic is long, which bounds the diameter.

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::quad;
use crate::riccati::MatrixTrajectory;

const C0: Matrix2<f64> = Matrix2::new(0.0, 0.0, 0.0, 1.0);
const C5: Matrix2<f64> = Matrix2::new(1.0, 0.0, 0.0, 0.0);

fn check_split(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("split parameter c = {c} must lie in (0, 1)")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

/// Sixth-order central difference of a matrix-valued function.
pub fn central_diff6<F: Fn(f64) -> Matrix2<f64>>(f: F, t: f64, h: f64) -> Matrix2<f64> {
    (-f(t - 3.0 * h) + f(t - 2.0 * h) * 9.0 - f(t - h) * 45.0 + f(t + h) * 45.0 - f(t + 2.0 * h) * 9.0 + f(t + 3.0 * h))
        / (60.0 * h)
}

fn relative(lhs: &Matrix2<f64>, rhs: &Matrix2<f64>) -> f64 {
    (lhs - rhs).amax() / lhs.amax().max(rhs.amax()).max(f64::MIN_POSITIVE)
}

fn min_eig(m: &Matrix2<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

fn max_eig(m: &Matrix2<f64>) -> f64 {
    m.symmetric_eigenvalues().max()
}

/// Reduced Hessian `[[S_00, S_02 + a/2], [S_02 + a/2, S_22 + tr S_lower]]`.
pub fn sbar(s: &DMatrix<f64>, a: f64) -> Matrix2<f64> {
    let off = s[(0, 2)] + a / 2.0;
    let lower: f64 = (3..s.nrows()).map(|i| s[(i, i)]).sum();
    Matrix2::new(s[(0, 0)], off, off, s[(2, 2)] + lower)
}

/// `diag(1/eps, 1) Sbar diag(1/eps, 1)`.
pub fn shat(s: &DMatrix<f64>, a: f64, eps: f64) -> Matrix2<f64> {
    let p = Matrix2::new(1.0 / eps, 0.0, 0.0, 1.0);
    p * sbar(s, a) * p
}

/// Sub-Riemannian comparison solution on `[0, 1)`.
#[derive(Clone, Copy, Debug)]
pub struct S0Solution {
    pub a: f64,
    pub n: usize,
    pub c: f64,
}

/// `K(t)` of the sub-Riemannian reduced system.
pub fn k_sub(a: f64, t: f64) -> Matrix2<f64> {
    let u = 1.0 - t;
    let off = -6.0 / (a * u * u);
    Matrix2::new(12.0 / (a * a * u.powi(3)), off, off, 4.0 / u)
}

pub fn s0_solution(a: f64, n: usize, c: f64) -> Result<S0Solution> {
    check_positive("a", a)?;
    check_split(c)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    Ok(S0Solution { a, n, c })
}

impl S0Solution {
    pub fn eval(&self, t: f64) -> Matrix2<f64> {
        let (a, c, n, u) = (self.a, self.c, self.n as f64, 1.0 - t);
        let den = (1.0 - c) * c;
        let s11 = 12.0 * (26.0 - 26.0 * n + 5.0 * c - 6.0 * n * c + c * c) / (den * a * a * u.powi(3));
        let s12 = -6.0 * (14.0 - 14.0 * n + c - 2.0 * n * c + c * c) / (den * a * u * u);
        let s22 = -4.0 * ((c + 6.0) * (n - 1.0) + c * (n - c)) / (den * u);
        Matrix2::new(s11, s12, s12, s22)
    }

    pub fn rhs(&self, t: f64, s: &Matrix2<f64>) -> Matrix2<f64> {
        let (a, c, nu, u) = (self.a, self.c, self.n as f64 - 1.0, 1.0 - t);
        let k = k_sub(a, t);
        let c4 = Matrix2::new(0.0, 0.0, a, 0.0);
        s * (C0 * k + c4.transpose()) + (k * C0 + c4) * s + k * C0 * k + C0 * (32.0 * nu / ((1.0 - c) * u * u))
            + C5 * (72.0 * nu / (c * a * a * u.powi(4)))
    }

    /// Relative residual of the defining ODE at `t`.
    pub fn residual(&self, t: f64) -> f64 {
        let h = 1e-3 * (1.0 - t).min(0.1);
        relative(&central_diff6(|s| self.eval(s), t, h), &self.rhs(t, &self.eval(t)))
    }
}

/// One row of a comparison report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub lhs_eig_min: f64,
    pub rhs_eig_max: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub pass: bool,
    pub min_slack: f64,
    pub t_worst: f64,
}

impl ComparisonReport {
    fn from_rows(rows: Vec<ComparisonRow>, tol: f64) -> Self {
        let (min_slack, t_worst) =
            rows.iter().fold((f64::INFINITY, f64::NAN), |(m, tw), r| if r.slack < m { (r.slack, r.t) } else { (m, tw) });
        ComparisonReport { pass: !rows.is_empty() && min_slack >= -tol, rows, min_slack, t_worst }
    }

    pub fn merge(reports: impl IntoIterator<Item = ComparisonReport>, tol: f64) -> Self {
        Self::from_rows(reports.into_iter().flat_map(|r| r.rows).collect(), tol)
    }
}

fn compare_pair(t: f64, lhs: &Matrix2<f64>, rhs: &Matrix2<f64>) -> ComparisonRow {
    ComparisonRow { t, lhs_eig_min: min_eig(lhs), rhs_eig_max: max_eig(rhs), slack: min_eig(&(lhs - rhs)) }
}

/// `Sbar(t) - S0(t)` in the PSD order, on the samples of a forward-time trajectory.
pub fn royden_compare(s_traj: &MatrixTrajectory, a: f64, s0: &S0Solution, tol: f64) -> ComparisonReport {
    let rows = s_traj.valid().map(|(t, s)| compare_pair(t, &sbar(s, a), &s0.eval(t))).collect();
    ComparisonReport::from_rows(rows, tol)
}

/// `Shat(1 - t) - Sr(t)` on the samples of a forward-time trajectory; rows are
/// reported against `t`.
pub fn epsilon_compare(s_traj: &MatrixTrajectory, sr: &SrEps, tol: f64) -> ComparisonReport {
    let rows = s_traj
        .valid()
        .filter(|(s, _)| *s < 1.0)
        .map(|(s, m)| {
            let t = 1.0 - s;
            compare_pair(t, &shat(m, sr.a, sr.eps), &sr.eval(t))
        })
        .collect();
    ComparisonReport::from_rows(rows, tol)
}

/// `Sbar(1 - t) - Sr(t)` for the trigonometric solution.
pub fn trig_compare(s_traj: &MatrixTrajectory, sr: &SrTrig, tol: f64) -> Result<ComparisonReport> {
    let mut rows = Vec::new();
    for (s, m) in s_traj.valid().filter(|(s, _)| *s < 1.0) {
        let t = 1.0 - s;
        rows.push(compare_pair(t, &sbar(m, sr.a), &sr.eval(t)?));
    }
    Ok(ComparisonReport::from_rows(rows, tol))
}

/// Exponent from the sub-Riemannian comparison at split `c`:
/// `ceil(1 + 4[(c+6)(n-1) + c(n-c)] / ((1-c)c))`.
pub fn mcp_exponent_at(n: usize, c: f64) -> Result<u32> {
    check_split(c)?;
    let n = n as f64;
    let v = 1.0 + 4.0 * ((c + 6.0) * (n - 1.0) + c * (n - c)) / ((1.0 - c) * c);
    Ok((v - 1e-9).ceil() as u32)
}

/// Smallest [`mcp_exponent_at`] over `c = 0.05, 0.10, ..., 0.95`, with the minimizing `c`.
pub fn mcp_exponent(n: usize) -> (u32, f64) {
    (1..=19)
        .map(|k| k as f64 * 0.05)
        .map(|c| (mcp_exponent_at(n, c).unwrap(), c))
        .min_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)))
        .unwrap()
}

/// Comparison solution of the Riemannian extensions, integrated from `t = 0`.
#[derive(Clone, Copy, Debug)]
pub struct SrEps {
    pub a: f64,
    pub eps: f64,
    pub n: usize,
    pub c: f64,
}

/// Below this value of `a eps t` the closed form cancels badly and the
/// integral is evaluated by quadrature instead.
const SR_EPS_SERIES_X: f64 = 0.5;

pub fn closed_form_sr_eps(a: f64, eps: f64, n: usize, c: f64) -> Result<SrEps> {
    check_positive("a", a)?;
    check_positive("epsilon", eps)?;
    check_split(c)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    Ok(SrEps { a, eps, n, c })
}

impl SrEps {
    fn ae(&self) -> f64 {
        self.a * self.eps
    }

    pub fn k_hat(&self, t: f64) -> Matrix2<f64> {
        let ae = self.ae();
        let x = ae * t;
        let q = 12.0 + x * x;
        let off = -6.0 * ae / q;
        Matrix2::new(12.0 / (t * q), off, off, 4.0 * (x * x + 3.0) / (t * q))
    }

    /// Fundamental matrix of the homogeneous part.
    pub fn phi(&self, t: f64) -> Matrix2<f64> {
        let ae = self.ae();
        let x = ae * t;
        let q = 12.0 + x * x;
        Matrix2::new(1.0 / (t * q), 1.0 / q, -ae / (2.0 * q), (6.0 - x * x) / (3.0 * ae * t * q))
    }

    /// Integrand of the particular solution.
    pub fn g(&self, t: f64) -> Matrix2<f64> {
        let (ae, c, nu) = (self.ae(), self.c, self.n as f64 - 1.0);
        let x = ae * t;
        let (x2, x4) = (x * x, x.powi(4));
        let q = 12.0 + x2;
        let dq = c * (c - 1.0) * q * q;
        let g00 = 288.0 * x2 * nu * (3.0 * c * x4 + 36.0 * c * x2 + x4 - 12.0 * x2 + 36.0) / dq;
        let g01 = -144.0 * ae * x * nu * (5.0 * c * x4 + 66.0 * c * x2 + 72.0 * c + 3.0 * x4 - 18.0 * x2) / dq;
        let g11 = 72.0 * ae * ae * nu * (7.0 * c * x4 + 96.0 * c * x2 + 144.0 * c + 9.0 * x4) / dq;
        Matrix2::new(g00, g01, g01, g11)
    }

    /// `M(t) = int_0^t g`.
    pub fn m(&self, t: f64) -> Matrix2<f64> {
        let (ae, c, nu) = (self.ae(), self.c, self.n as f64 - 1.0);
        let x = ae * t;
        if x.abs() < SR_EPS_SERIES_X {
            let entry = |i: usize, j: usize| quad::gauss_legendre(|s| self.g(s)[(i, j)], 0.0, t);
            let off = entry(0, 1);
            return Matrix2::new(entry(0, 0), off, off, entry(1, 1));
        }
        let q = 12.0 + x * x;
        let r12 = 12f64.sqrt();
        let at = (x / r12).atan();
        let alpha = at / r12;
        let beta = x / (24.0 * q) + at / (24.0 * r12);
        let gamma = 0.5 * (q / 12.0).ln();
        let delta = 0.5 * (1.0 / 12.0 - 1.0 / q);
        let d = c * (c - 1.0);
        let m00 = (288.0 * nu * (3.0 * c + 1.0) * x.powi(3) / 3.0 - 10368.0 * nu * (c + 1.0) * x
            + 31104.0 * (4.0 * c + 7.0) * nu * alpha
            - 1119744.0 * nu * beta)
            / (ae * d);
        let m01 = (-nu * (720.0 * c + 432.0) * x * x / 2.0 + 2592.0 * (3.0 * c + 5.0) * nu * gamma - 93312.0 * nu * delta) / d;
        let m11 = ae * (-5184.0 * (c + 3.0) * nu * alpha + 93312.0 * nu * beta + nu * (504.0 * c + 648.0) * x) / d;
        Matrix2::new(m00, m01, m01, m11)
    }

    pub fn eval(&self, t: f64) -> Matrix2<f64> {
        let phi = self.phi(t);
        -self.k_hat(t) + phi * self.m(t) * phi.transpose()
    }

    pub fn rhs(&self, t: f64, s: &Matrix2<f64>) -> Matrix2<f64> {
        let nu2 = 2.0 * self.n as f64 - 2.0;
        let k = self.k_hat(t);
        let a = k + Matrix2::new(0.0, 0.0, self.a, 0.0) * self.eps;
        -(a * s + s * a.transpose() + k * k + C0 * (nu2 * k[(1, 1)].powi(2) / (1.0 - self.c))
            + C5 * (nu2 * k[(0, 1)].powi(2) / self.c))
    }

    pub fn residual(&self, t: f64) -> f64 {
        let h = 1e-3 * t.min(1.0 / self.ae());
        relative(&central_diff6(|s| self.eval(s), t, h), &self.rhs(t, &self.eval(t)))
    }

    /// Leading small-`t` terms `(1/t) diag(-1, -(2n-1-c)/(1-c))` and the
    /// constant off-diagonal `-a eps (n-2+c) / (2(1-c))`.
    pub fn expansion(&self, t: f64) -> Matrix2<f64> {
        let (n, c) = (self.n as f64, self.c);
        let off = -self.ae() * (n - 2.0 + c) / (2.0 * (1.0 - c));
        Matrix2::new(-1.0 / t, off, off, -(2.0 * n - 1.0 - c) / ((1.0 - c) * t))
    }
}

/// Value and first three derivatives of a scalar function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; 4]);

impl Jet {
    pub fn var(t: f64) -> Jet {
        Jet([t, 1.0, 0.0, 0.0])
    }

    pub fn constant(c: f64) -> Jet {
        Jet([c, 0.0, 0.0, 0.0])
    }

    pub fn recip(self) -> Jet {
        let [u, u1, u2, u3] = self.0;
        let v = 1.0 / u;
        Jet([
            v,
            -u1 * v * v,
            (2.0 * u1 * u1 - u * u2) * v.powi(3),
            (-6.0 * u1.powi(3) + 6.0 * u * u1 * u2 - u * u * u3) * v.powi(4),
        ])
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;

    fn mul(self, o: Jet) -> Jet {
        let (f, g) = (self.0, o.0);
        Jet([
            f[0] * g[0],
            f[1] * g[0] + f[0] * g[1],
            f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2],
            f[3] * g[0] + 3.0 * f[2] * g[1] + 3.0 * f[1] * g[2] + f[0] * g[3],
        ])
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;

    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

/// The solutions `1/(t q)` and `1/q`, `q = 12 + (a eps t)^2`, of the
/// second-order equation, and the products spanning its symmetric square.
#[derive(Clone, Copy, Debug)]
pub struct SymmetricPowerBasis {
    pub a: f64,
    pub eps: f64,
}

pub fn symmetric_power_basis(a: f64, eps: f64) -> Result<SymmetricPowerBasis> {
    check_positive("a", a)?;
    check_positive("epsilon", eps)?;
    Ok(SymmetricPowerBasis { a, eps })
}

impl SymmetricPowerBasis {
    fn q(&self, t: f64) -> Jet {
        let ae2 = (self.a * self.eps).powi(2);
        let t = Jet::var(t);
        Jet::constant(12.0) + t * t * Jet::constant(ae2)
    }

    pub fn f1(&self, t: f64) -> Jet {
        (Jet::var(t) * self.q(t)).recip()
    }

    pub fn f2(&self, t: f64) -> Jet {
        self.q(t).recip()
    }

    /// `f1^2, f1 f2, f2^2`.
    pub fn squares(&self, t: f64) -> [Jet; 3] {
        let (f1, f2) = (self.f1(t), self.f2(t));
        [f1 * f1, f1 * f2, f2 * f2]
    }

    /// Second-order equation residual, relative to the largest term.
    pub fn second_order_residual(&self, f: Jet, t: f64) -> f64 {
        let x2 = (self.a * self.eps * t).powi(2);
        let q = 12.0 + x2;
        let terms = [f.0[2], 6.0 * (x2 + 4.0) / (t * q) * f.0[1], 6.0 * (self.a * self.eps).powi(2) / q * f.0[0]];
        terms.iter().sum::<f64>().abs() / terms.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Third-order (symmetric square) equation residual, relative to the largest term.
    pub fn third_order_residual(&self, g: Jet, t: f64) -> f64 {
        let ae = self.a * self.eps;
        let x2 = (ae * t).powi(2);
        let q = 12.0 + x2;
        let terms = [
            g.0[3],
            18.0 * (x2 + 4.0) / (t * q) * g.0[2],
            18.0 * (5.0 * x2 * x2 + 48.0 * x2 + 48.0) / (t * t * q * q) * g.0[1],
            24.0 * ae * ae * (5.0 * x2 + 24.0) / (t * q * q) * g.0[0],
        ];
        terms.iter().sum::<f64>().abs() / terms.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn wronskian(&self, t: f64) -> f64 {
        let (f1, f2) = (self.f1(t), self.f2(t));
        f1.0[0] * f2.0[1] - f1.0[1] * f2.0[0]
    }
}

/// First positive root of `x cos x - sin x`.
pub fn first_root_x0() -> f64 {
    let f = |x: f64| x * x.cos() - x.sin();
    let (mut lo, mut hi) = (std::f64::consts::PI, 1.5 * std::f64::consts::PI);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / (-x * x.sin());
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - x).abs() < 1e-16 || hi - lo < 1e-15;
        x = next;
        if done {
            break;
        }
    }
    x
}

pub fn diameter_bound(r: f64) -> Result<f64> {
    check_positive("r", r)?;
    Ok(2.0 * first_root_x0() / r)
}

/// `y cos y - sin y`, `y - sin y cos y` and `sin 2y - 2y cos 2y`.
fn trig_parts(y: f64) -> (f64, f64, f64) {
    if y.abs() < 0.5 {
        let (mut x, mut p, mut w) = (0.0, 0.0, 0.0);
        let y2 = y * y;
        let mut term = y; // y^(2k+1) / (2k+1)!
        let mut pow2 = 2.0; // 2^(2k+1)
        for k in 1..14 {
            let kf = k as f64;
            term *= -y2 / ((2.0 * kf) * (2.0 * kf + 1.0));
            pow2 *= 4.0;
            x += term * 2.0 * kf;
            p -= term * pow2 / 2.0;
            w -= term * pow2 * 2.0 * kf;
        }
        (x, p, w)
    } else {
        let (s, c) = y.sin_cos();
        let xx = 2.0 * y;
        (y * c - s, y - s * c, xx.sin() - xx * xx.cos())
    }
}

/// Comparison solution under `tr R >= (2n-1) r^2 a^2`.
#[derive(Clone, Copy, Debug)]
pub struct SrTrig {
    pub a: f64,
    pub r: f64,
    pub n: usize,
    pub c: f64,
}

pub fn bonnet_myers_solution(a: f64, r: f64, n: usize, c: f64) -> Result<SrTrig> {
    check_positive("a", a)?;
    check_positive("r", r)?;
    check_split(c)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    Ok(SrTrig { a, r, n, c })
}

impl SrTrig {
    fn y(&self, t: f64) -> f64 {
        0.5 * self.r * self.a * t
    }

    /// `m(t) = (y cos y - sin y)^2` with `y = r a t / 2`.
    pub fn m_fn(&self, t: f64) -> f64 {
        trig_parts(self.y(t)).0.powi(2)
    }

    pub fn k(&self, t: f64) -> Matrix2<f64> {
        let (r, a, y) = (self.r, self.a, self.y(t));
        let (x, _, w) = trig_parts(y);
        let (s, ch) = y.sin_cos();
        let k12 = r * r * a * s / (2.0 * x);
        Matrix2::new(-r.powi(3) * a * ch / (2.0 * x), k12, k12, r * a * w / (-4.0 * s * x))
    }

    pub fn phi(&self, t: f64) -> Matrix2<f64> {
        let (r, y) = (self.r, self.y(t));
        let (x, p, _) = trig_parts(y);
        let (s, ch) = y.sin_cos();
        Matrix2::new(ch / (2.0 * x), s / (2.0 * x), -s / (2.0 * r * x), -p / (2.0 * r * x * s))
    }

    pub fn g(&self, t: f64) -> Matrix2<f64> {
        let (r, a, c, y) = (self.r, self.a, self.c, self.y(t));
        let (x, p, w) = trig_parts(y);
        let (s, ch) = y.sin_cos();
        let r4a2 = r.powi(4) * a * a;
        let f1 = r4a2 * s * s / (c * x * x);
        let f2 = r4a2 * w * w / (4.0 * (1.0 - c) * x * x);
        let scale = -(2.0 * self.n as f64 - 2.0);
        let s2 = s * s;
        scale
            * (Matrix2::new(p * p, -p * s2, -p * s2, s2 * s2) * f1
                + Matrix2::new(s2, -s * ch, -s * ch, ch * ch) * f2)
    }

    fn integrate_g(&self, t0: f64, t1: f64) -> Matrix2<f64> {
        if self.n == 1 || t0 == t1 {
            return Matrix2::zeros();
        }
        let panels = 4 + (self.y(t1 - t0).abs() * 4.0).ceil() as usize;
        let entry = |i: usize, j: usize| quad::gauss_legendre_composite(|s| self.g(s)[(i, j)], t0, t1, panels);
        let off = entry(0, 1);
        Matrix2::new(entry(0, 0), off, off, entry(1, 1))
    }

    /// `M(t) = int_0^t g`.
    pub fn m(&self, t: f64) -> Matrix2<f64> {
        self.integrate_g(0.0, t)
    }

    fn assemble(&self, t: f64, m: &Matrix2<f64>) -> Matrix2<f64> {
        let phi = self.phi(t);
        -self.k(t) + phi * m * phi.transpose()
    }

    /// Conjugate time `t0` in `(0, 1]`, the first zero of `m`, found by a grid
    /// scan of its sign-carrying root `y cos y - sin y` and bisection.
    pub fn blow_up_time(&self) -> Option<f64> {
        let f = |t: f64| trig_parts(self.y(t)).0;
        let steps = 4096;
        let mut prev = f(1.0 / steps as f64);
        for k in 2..=steps {
            let t = k as f64 / steps as f64;
            let cur = f(t);
            if cur >= 0.0 && prev < 0.0 {
                let (mut lo, mut hi) = ((k - 1) as f64 / steps as f64, t);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev = cur;
        }
        None
    }

    /// Whether `Sr_11` has a pole at [`blow_up_time`](Self::blow_up_time). A
    /// pole makes it grow about 100-fold between `t0 (1 - 1e-4)` and
    /// `t0 (1 - 1e-6)`; tenfold is required.
    pub fn diverges(&self) -> bool {
        self.blow_up_time()
            .is_some_and(|t0| self.sr11(t0 * (1.0 - 1e-6)).abs() > 10.0 * self.sr11(t0 * (1.0 - 1e-4)).abs())
    }

    /// `Sr(t)`; fails at or past the first zero of `m`.
    pub fn eval(&self, t: f64) -> Result<Matrix2<f64>> {
        if let Some(t0) = self.blow_up_time() {
            if t >= t0 {
                return Err(Error::BlowUp { step: 0, t: t0 });
            }
        }
        Ok(self.assemble(t, &self.m(t)))
    }

    /// `Sr_11(t)` only; it stays finite where `sin y = 0`.
    pub fn sr11(&self, t: f64) -> f64 {
        let (r, a, y) = (self.r, self.a, self.y(t));
        let (x, _, _) = trig_parts(y);
        let (s, ch) = y.sin_cos();
        let m = self.m(t);
        let (u, v) = (ch / (2.0 * x), s / (2.0 * x));
        r.powi(3) * a * ch / (2.0 * x) + u * u * m[(0, 0)] + 2.0 * u * v * m[(0, 1)] + v * v * m[(1, 1)]
    }

    pub fn rhs(&self, t: f64, s: &Matrix2<f64>) -> Matrix2<f64> {
        let (a, c, n) = (self.a, self.c, self.n as f64);
        let k = self.k(t);
        let (k12, k22) = (k[(0, 1)], k[(1, 1)]);
        let d1 = Matrix2::new(0.0, a, k12, k22);
        let d2 = Matrix2::new(
            (2.0 * n - 2.0 + c) * k12 * k12 / c,
            k12 * k22,
            k12 * k22,
            (2.0 * n - c - 1.0) * k22 * k22 / (1.0 - c),
        );
        -s * d1 - d1.transpose() * s - d2 + C0 * (self.r * self.r * a * a)
    }

    /// ODE residual at `t`. `M` is integrated once to `t`; the difference
    /// stencil only adds short Gauss-Legendre increments to it.
    pub fn residual(&self, t: f64) -> f64 {
        let h = 1e-3 * t.min(1.0 / (self.r * self.a));
        let base = self.m(t);
        let at = |s: f64| self.assemble(s, &(base + self.integrate_g(t, s)));
        relative(&central_diff6(at, t, h), &self.rhs(t, &self.assemble(t, &base)))
    }

    /// Limits of `t^3 Sr_11`, `t^2 Sr_12` and `t Sr_22` as `t -> 0`.
    pub fn small_t_limits(&self) -> [f64; 3] {
        let (a, c, n) = (self.a, self.c, self.n as f64);
        let p = (2.0 * n - c - 1.0) / (1.0 - c);
        let q = (2.0 * n - 2.0 + c) / c;
        [
            (-192.0 * p - 156.0 * q + 336.0) / (a * a),
            6.0 * (8.0 * p + 7.0 * q - 14.0) / a,
            -4.0 * (4.0 * p + 3.0 * q - 6.0),
        ]
    }
}
