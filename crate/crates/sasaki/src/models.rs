//! Heisenberg groups H^{2n+1} as Sasakian models.
//!
//! Coordinates are ordered `(x_1..x_n, y_1..y_n, z)` and the left-invariant
//! frame `(X_1..X_n, Y_1..Y_n, V)` uses the same index layout, so a frame
//! vector is a plain `DVector` of length `2n+1`.
//!
//! * `eta = dz - 1/2 sum(x_i dy_i - y_i dx_i)`
//! * `X_i = d/dx_i - (y_i/2) d/dz`, `Y_i = d/dy_i + (x_i/2) d/dz`, `V = d/dz`
//! * `J X_i = Y_i`, `J Y_i = -X_i`, `J V = 0`
//!
//! The only nonzero brackets are `[X_i, Y_i] = V`. All connection and
//! curvature data follow from these constants through the Koszul formula.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Metric scale on the Reeb direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Epsilon {
    /// Pure sub-Riemannian structure. Riemannian identities use `|V| = 1`.
    Sub,
    Value(f64),
}

impl Epsilon {
    /// `|V|` of the Riemannian metric used for connection data.
    pub fn riemannian_scale(self) -> f64 {
        match self {
            Epsilon::Sub => 1.0,
            Epsilon::Value(e) => e,
        }
    }

    /// Coefficient of `p_V^2 / 2` in the Hamiltonian.
    pub fn vertical_weight(self) -> f64 {
        match self {
            Epsilon::Sub => 0.0,
            Epsilon::Value(e) => 1.0 / (e * e),
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Sub => write!(f, "sub"),
            Epsilon::Value(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SasakianModel {
    pub n: usize,
    pub epsilon: Epsilon,
}

/// Build the Heisenberg model of dimension `2n+1`.
pub fn build_heisenberg(n: usize, epsilon: Epsilon) -> Result<SasakianModel> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if let Epsilon::Value(e) = epsilon {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {e}")));
        }
    }
    Ok(SasakianModel { n, epsilon })
}

impl SasakianModel {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn v_index(&self) -> usize {
        2 * self.n
    }

    /// Frame vector `e_k` as components.
    pub fn basis(&self, k: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[k] = 1.0;
        v
    }

    /// Diagonal of the metric in the frame.
    pub fn frame_metric(&self) -> DVector<f64> {
        let mut g = DVector::from_element(self.dim(), 1.0);
        let e = self.epsilon.riemannian_scale();
        g[self.v_index()] = e * e;
        g
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let g = self.frame_metric();
        (0..self.dim()).map(|k| g[k] * u[k] * v[k]).sum()
    }

    /// Matrix of J in the frame.
    pub fn j_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut j = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            j[(n + i, i)] = 1.0;
            j[(i, n + i)] = -1.0;
        }
        j
    }

    /// Horizontal part of a frame vector.
    pub fn horizontal(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut h = v.clone();
        h[self.v_index()] = 0.0;
        h
    }

    /// Structure constants: `[e_a, e_b] = sum_k c[a][b][k] e_k`.
    pub fn structure_constant(&self, a: usize, b: usize, k: usize) -> f64 {
        let n = self.n;
        if k != self.v_index() || a >= 2 * n || b >= 2 * n {
            return 0.0;
        }
        if b == a + n && a < n {
            1.0
        } else if a == b + n && b < n {
            -1.0
        } else {
            0.0
        }
    }

    /// Lie bracket of left-invariant fields given by frame components.
    pub fn bracket(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut w = DVector::zeros(self.dim());
        w[self.v_index()] = (0..n).map(|i| u[i] * v[n + i] - u[n + i] * v[i]).sum();
        w
    }

    /// Coordinate components of the frame at point `p`, one column per frame vector.
    pub fn frame_coords(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let d = self.dim();
        let mut f = DMatrix::identity(d, d);
        for i in 0..n {
            f[(2 * n, i)] = -0.5 * p[n + i];
            f[(2 * n, n + i)] = 0.5 * p[i];
        }
        f
    }

    /// `eta_p(w)` for a coordinate vector `w`.
    pub fn eta(&self, p: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let n = self.n;
        w[2 * n] - 0.5 * (0..n).map(|i| p[i] * w[n + i] - p[n + i] * w[i]).sum::<f64>()
    }

    /// `d eta(u, w) = -sum(du_x dw_y - du_y dw_x)` on coordinate vectors (point independent).
    pub fn d_eta(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let n = self.n;
        -(0..n).map(|i| u[i] * w[n + i] - u[n + i] * w[i]).sum::<f64>()
    }

    /// Coordinate Lie bracket of two frame fields at `p`, computed from the
    /// (affine) coordinate coefficients as `(DB) A - (DA) B`.
    pub fn coordinate_bracket(&self, a: usize, b: usize, p: &DVector<f64>) -> DVector<f64> {
        let fa = self.frame_coords(p).column(a).into_owned();
        let fb = self.frame_coords(p).column(b).into_owned();
        let da = self.frame_jacobian(a);
        let db = self.frame_jacobian(b);
        &db * fa - &da * fb
    }

    /// Constant coordinate Jacobian of frame field `k`.
    fn frame_jacobian(&self, k: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        if k < n {
            m[(2 * n, n + k)] = -0.5;
        } else if k < 2 * n {
            m[(2 * n, k - n)] = 0.5;
        }
        m
    }

    /// Group law `(x, y, z) * (x', y', z')`.
    pub fn group_mul(&self, p: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut r = p + q;
        r[2 * n] += 0.5 * (0..n).map(|i| p[i] * q[n + i] - p[n + i] * q[i]).sum::<f64>();
        r
    }

    pub fn group_inv(&self, p: &DVector<f64>) -> DVector<f64> {
        -p
    }
}

/// Christoffel-type table: `gamma[(a, b)]` holds the frame components of `nabla_{e_a} e_b`.
#[derive(Clone, Debug)]
pub struct ConnectionTable {
    pub dim: usize,
    gamma: Vec<DVector<f64>>,
}

impl ConnectionTable {
    pub fn get(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.gamma[a * self.dim + b]
    }

    /// `nabla_u v` for left-invariant fields.
    pub fn cov(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut w = DVector::zeros(self.dim);
        for a in 0..self.dim {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..self.dim {
                if v[b] != 0.0 {
                    w += self.get(a, b) * (u[a] * v[b]);
                }
            }
        }
        w
    }

    /// `R(u, v) w = nabla_u nabla_v w - nabla_v nabla_u w - nabla_[u,v] w`.
    pub fn curvature(&self, model: &SasakianModel, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let nv = self.cov(v, w);
        let nu = self.cov(u, w);
        self.cov(u, &nv) - self.cov(v, &nu) - self.cov(&model.bracket(u, v), w)
    }
}

/// Levi-Civita connection of the model's Riemannian metric, from the Koszul formula.
pub fn connection(model: &SasakianModel) -> ConnectionTable {
    let d = model.dim();
    let g = model.frame_metric();
    let c = |a: usize, b: usize, k: usize| model.structure_constant(a, b, k);
    let mut gamma = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let mut v = DVector::zeros(d);
            for k in 0..d {
                // <nabla_a e_b, e_k> = 1/2 (<[a,b],k> - <[b,k],a> + <[k,a],b>)
                let val = 0.5 * (c(a, b, k) * g[k] - c(b, k, a) * g[a] + c(k, a, b) * g[b]);
                v[k] = val / g[k];
            }
            gamma.push(v);
        }
    }
    ConnectionTable { dim: d, gamma }
}

/// Tanaka-Webster connection built from the Levi-Civita table.
pub fn tanaka_webster(model: &SasakianModel, lc: &ConnectionTable) -> ConnectionTable {
    let d = model.dim();
    let j = model.j_matrix();
    let vv = model.basis(model.v_index());
    let mut gamma = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let ea = model.basis(a);
            let eb = model.basis(b);
            let jea = &j * &ea;
            let jeb = &j * &eb;
            let v = lc.get(a, b) + &jea * (0.5 * model.inner(&vv, &eb)) - &vv * (0.5 * model.inner(&jea, &eb))
                + &jeb * (0.5 * model.inner(&vv, &ea));
            gamma.push(v);
        }
    }
    ConnectionTable { dim: d, gamma }
}

/// Maximum torsion and metric-compatibility residuals of a table.
pub fn koszul_residuals(model: &SasakianModel, table: &ConnectionTable) -> (f64, f64) {
    let d = model.dim();
    let mut torsion: f64 = 0.0;
    let mut metric: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let ea = model.basis(a);
            let eb = model.basis(b);
            let t = table.get(a, b) - table.get(b, a) - model.bracket(&ea, &eb);
            torsion = torsion.max(t.amax());
            for k in 0..d {
                let ek = model.basis(k);
                let m = model.inner(table.get(a, b), &ek) + model.inner(&eb, table.get(a, k));
                metric = metric.max(m.abs());
            }
        }
    }
    (torsion, metric)
}

/// Residuals of the structure and curvature identities.
#[derive(Clone, Debug, Default)]
pub struct IdentityReport {
    /// Reeb conditions `eta(V) = 1`, `d eta(V, .) = 0`.
    pub reeb: f64,
    /// `d eta(Z1, Z2) = <Z1, J Z2>` on horizontal pairs.
    pub contact: f64,
    /// `J V = 0`, `J^2 X = -X`.
    pub complex: f64,
    /// Sasakian bracket identity.
    pub sasakian: f64,
    /// Structure constants against coordinate brackets.
    pub brackets: f64,
    pub torsion: f64,
    pub metric: f64,
    /// Levi-Civita identities: `nabla_Y V = -JY/2`, `(nabla_X1 J) X2 = <X1,X2> V/2`,
    /// `(nabla_X J) V = -X/2`, `nabla_V J = 0`.
    pub levi_civita: [f64; 4],
    /// Riemann vs Tanaka-Webster relations.
    pub curvature: [f64; 4],
    /// `max |Rm_TW|` over frame triples.
    pub tw_flat: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        let mut m = self.reeb.max(self.contact).max(self.complex).max(self.sasakian);
        m = m.max(self.brackets).max(self.torsion).max(self.metric).max(self.tw_flat);
        for v in self.levi_civita.iter().chain(self.curvature.iter()) {
            m = m.max(*v);
        }
        m
    }

    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("reeb", self.reeb),
            ("contact_form", self.contact),
            ("complex_structure", self.complex),
            ("sasakian_bracket", self.sasakian),
            ("structure_constants", self.brackets),
            ("torsion", self.torsion),
            ("metric_compatibility", self.metric),
            ("nabla_Y_V", self.levi_civita[0]),
            ("nabla_X_J_horizontal", self.levi_civita[1]),
            ("nabla_X_J_V", self.levi_civita[2]),
            ("nabla_V_J", self.levi_civita[3]),
            ("riemann_V", self.curvature[0]),
            ("riemann_vs_tanaka_webster", self.curvature[1]),
            ("tanaka_webster_V", self.curvature[2]),
            ("tanaka_webster_mixed", self.curvature[3]),
            ("tanaka_webster_flat", self.tw_flat),
        ]
    }
}

fn upd(slot: &mut f64, v: &DVector<f64>) {
    *slot = slot.max(v.amax());
}

/// Evaluate every structure identity on the frame at the sample `points`.
///
/// Connection identities only hold for `|V| = 1`; call this on an `epsilon = 1`
/// or sub-Riemannian model.
pub fn identity_report(model: &SasakianModel, points: &[DVector<f64>]) -> IdentityReport {
    let d = model.dim();
    let n = model.n;
    let vi = model.v_index();
    let j = model.j_matrix();
    let lc = connection(model);
    let tw = tanaka_webster(model, &lc);
    let mut r = IdentityReport::default();
    let e = |k: usize| model.basis(k);
    let vv = e(vi);
    let horizontal = |k: usize| k < 2 * n;

    for p in points {
        let f = model.frame_coords(p);
        let vcoord = f.column(vi).into_owned();
        r.reeb = r.reeb.max((model.eta(p, &vcoord) - 1.0).abs());
        for a in 0..d {
            let fa = f.column(a).into_owned();
            r.reeb = r.reeb.max(model.d_eta(&vcoord, &fa).abs());
            for b in 0..d {
                let fb = f.column(b).into_owned();
                let ja = &j * e(a);
                let jb = &j * e(b);
                if horizontal(a) && horizontal(b) {
                    r.contact = r.contact.max((model.d_eta(&fa, &fb) - model.inner(&e(a), &jb)).abs());
                }
                // d eta(Y1, Y2) V = -J^2[Y1,Y2] + J[JY1,Y2] + J[Y1,JY2] - [JY1,JY2]
                let lhs = &vv * model.d_eta(&fa, &fb);
                let rhs = -(&j * (&j * model.bracket(&e(a), &e(b)))) + &j * model.bracket(&ja, &e(b))
                    + &j * model.bracket(&e(a), &jb)
                    - model.bracket(&ja, &jb);
                upd(&mut r.sasakian, &(lhs - rhs));
                // structure constants reproduce coordinate brackets
                let coord = model.coordinate_bracket(a, b, p);
                let from_constants = &f * model.bracket(&e(a), &e(b));
                upd(&mut r.brackets, &(coord - from_constants));
            }
        }
    }

    upd(&mut r.complex, &(&j * &vv));
    for a in 0..2 * n {
        upd(&mut r.complex, &(&j * (&j * e(a)) + e(a)));
    }

    let (t, m) = koszul_residuals(model, &lc);
    r.torsion = t;
    r.metric = m;

    let nabla_j = |u: &DVector<f64>, w: &DVector<f64>| lc.cov(u, &(&j * w)) - &j * lc.cov(u, w);
    for a in 0..d {
        upd(&mut r.levi_civita[0], &(lc.cov(&e(a), &vv) + (&j * e(a)) * 0.5));
        upd(&mut r.levi_civita[3], &nabla_j(&vv, &e(a)));
        if horizontal(a) {
            upd(&mut r.levi_civita[2], &(nabla_j(&e(a), &vv) + e(a) * 0.5));
            for b in 0..2 * n {
                let target = &vv * (0.5 * model.inner(&e(a), &e(b)));
                upd(&mut r.levi_civita[1], &(nabla_j(&e(a), &e(b)) - target));
            }
        }
    }

    for a in 0..d {
        for b in 0..d {
            let (ea, eb) = (e(a), e(b));
            // Rm(Y1,Y2)V = <Y2,V>/4 (Y1)_hor - <Y1,V>/4 (Y2)_hor
            let lhs = lc.curvature(model, &ea, &eb, &vv);
            let rhs = model.horizontal(&ea) * (0.25 * model.inner(&eb, &vv))
                - model.horizontal(&eb) * (0.25 * model.inner(&ea, &vv));
            upd(&mut r.curvature[0], &(lhs - rhs));
            upd(&mut r.curvature[2], &tw.curvature(model, &ea, &eb, &vv));
            for c in 0..d {
                let ec = e(c);
                upd(&mut r.tw_flat, &tw.curvature(model, &ea, &eb, &ec));
                if horizontal(a) && horizontal(c) {
                    upd(&mut r.curvature[3], &tw.curvature(model, &ea, &vv, &ec));
                }
                if horizontal(a) && horizontal(b) && horizontal(c) {
                    // TW(X2,X3)X1 = Rm(X2,X3)X1 + <JX3,X1>/4 JX2 - <JX2,X1>/4 JX3 - <JX2,X3>/2 JX1
                    let (x2, x3, x1) = (&ea, &eb, &ec);
                    let jx1 = &j * x1;
                    let jx2 = &j * x2;
                    let jx3 = &j * x3;
                    let rhs = lc.curvature(model, x2, x3, x1) + &jx2 * (0.25 * model.inner(&jx3, x1))
                        - &jx3 * (0.25 * model.inner(&jx2, x1))
                        - &jx1 * (0.5 * model.inner(&jx2, x3));
                    upd(&mut r.curvature[1], &(tw.curvature(model, x2, x3, x1) - rhs));
                }
            }
        }
    }
    r
}

/// Run [`identity_report`] on `points` and fail if any residual exceeds `tol`.
pub fn curvature_check(model: &SasakianModel, points: &[DVector<f64>], tol: f64) -> Result<IdentityReport> {
    if let Epsilon::Value(e) = model.epsilon {
        if (e - 1.0).abs() > 1e-15 {
            return Err(Error::InvalidParameter("curvature_check needs epsilon = 1 or sub".into()));
        }
    }
    let r = identity_report(model, points);
    for (name, v) in r.rows() {
        if v > tol {
            return Err(Error::Residual { what: name.into(), residual: v, tol });
        }
    }
    Ok(r)
}

pub type CurvatureFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Tanaka-Webster curvature along the geodesic, in the moving frame.
#[derive(Clone)]
pub enum CurvatureProfile {
    Flat,
    /// `k^2 a^2 diag(0, 0, 1, ..., 1)`.
    Isotropic(f64),
    /// Time callback; must be pure.
    Custom(CurvatureFn),
}

impl fmt::Debug for CurvatureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvatureProfile::Flat => write!(f, "Flat"),
            CurvatureProfile::Isotropic(k) => write!(f, "Isotropic({k})"),
            CurvatureProfile::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl CurvatureProfile {
    /// Profile matrix of size `dim` at time `t` for horizontal speed `a`.
    pub fn matrix(&self, dim: usize, a: f64, t: f64) -> Result<DMatrix<f64>> {
        match self {
            CurvatureProfile::Flat => Ok(DMatrix::zeros(dim, dim)),
            CurvatureProfile::Isotropic(k) => {
                let mut m = DMatrix::zeros(dim, dim);
                for i in 2..dim {
                    m[(i, i)] = k * k * a * a;
                }
                Ok(m)
            }
            CurvatureProfile::Custom(f) => {
                let m = f(t);
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::ProfileDimension { got: m.nrows(), expected: dim });
                }
                let asym = (&m - m.transpose()).amax();
                if asym > 1e-12 * (1.0 + m.amax()) {
                    return Err(Error::AsymmetricProfile(asym));
                }
                for i in 0..dim {
                    for l in 0..2 {
                        if m[(i, l)] != 0.0 || m[(l, i)] != 0.0 {
                            return Err(Error::ProfileLeadingBlock);
                        }
                    }
                }
                Ok(m)
            }
        }
    }

    /// Piecewise-linear profile through sampled matrices.
    pub fn from_table(times: Vec<f64>, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != mats.len() {
            return Err(Error::InvalidParameter("profile table needs matching, non-empty times and matrices".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("profile table times must increase".into()));
        }
        Ok(CurvatureProfile::Custom(Arc::new(move |t| {
            let k = times.partition_point(|&s| s <= t);
            if k == 0 {
                return mats[0].clone();
            }
            if k == times.len() {
                return mats[k - 1].clone();
            }
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            &mats[k - 1] * (1.0 - w) + &mats[k] * w
        })))
    }
}

/// Shorthand for [`CurvatureProfile::matrix`].
pub fn profile_matrix(profile: &CurvatureProfile, dim: usize, a: f64, t: f64) -> Result<DMatrix<f64>> {
    profile.matrix(dim, a, t)
}
