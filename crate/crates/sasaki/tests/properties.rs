//! Property tests over randomly drawn models, geodesics and parameters.

use approx::assert_relative_eq;
use nalgebra::DVector;
use proptest::prelude::*;

use sasaki::comparison::{
    bonnet_myers_solution, closed_form_sr_eps, epsilon_compare, mcp_exponent, royden_compare, s0_solution,
    symmetric_power_basis, Jet,
};
use sasaki::exec::{with_thread_cap, Exec};
use sasaki::geodesics::{hamiltonian, integrate, invariants, velocity_residual, GeodesicInvariants, GeodesicState};
use sasaki::mcp::{self, BoxSet, ContractionExperiment};
use sasaki::models::{build_heisenberg, connection, identity_report, koszul_residuals, CurvatureProfile, Epsilon};
use sasaki::riccati::{build_coefficients, j_lower, propagate_t, solve_s};

fn epsilon() -> impl Strategy<Value = Epsilon> {
    prop_oneof![Just(Epsilon::Sub), (0.3f64..3.0).prop_map(Epsilon::Value)]
}

fn point(n: usize, scale: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-scale..scale, 2 * n + 1).prop_map(DVector::from_vec)
}

fn grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frame_identities_hold_at_random_points(n in 1usize..=3, pts in prop::collection::vec(point(3, 4.0), 1..4)) {
        let pts: Vec<_> = pts.iter().map(|p| p.rows(0, 2 * n + 1).into_owned()).collect();
        for eps in [Epsilon::Value(1.0), Epsilon::Sub] {
            let rep = identity_report(&build_heisenberg(n, eps).unwrap(), &pts);
            prop_assert!(rep.contact <= 1e-12 && rep.sasakian <= 1e-12);
            prop_assert!(rep.max_residual() < 1e-10, "{:?}", rep);
        }
    }

    #[test]
    fn levi_civita_table_is_torsion_free_and_metric(n in 1usize..=3, eps in 0.2f64..4.0) {
        let model = build_heisenberg(n, Epsilon::Value(eps)).unwrap();
        let (torsion, metric) = koszul_residuals(&model, &connection(&model));
        prop_assert!(torsion < 1e-12 && metric < 1e-12);
    }

    #[test]
    fn flow_conserves_energy_and_invariants(
        n in 1usize..=2,
        eps in epsilon(),
        q in point(2, 2.0),
        dir in point(2, 1.0),
        norm in 0.1f64..10.0,
    ) {
        let d = 2 * n + 1;
        let dir = dir.rows(0, d).into_owned();
        prop_assume!(dir.norm() > 1e-3);
        let model = build_heisenberg(n, eps).unwrap();
        let start = GeodesicState::new(q.rows(0, d).into_owned(), dir.normalize() * norm);
        let traj = integrate(&model, &start, 1.0, 1000).unwrap();
        let h0 = hamiltonian(&model, &start);
        let i0 = invariants(&model, &start);
        for s in &traj {
            prop_assert!((hamiltonian(&model, s) - h0).abs() <= 1e-10 * h0.max(1.0));
            let i = invariants(&model, s);
            prop_assert!((i.a - i0.a).abs() <= 1e-9 && (i.b - i0.b).abs() <= 1e-9);
        }
        // The check differentiates the samples with a five-point stencil whose
        // truncation error is about dt^4 |h| b^4 / 30 on a circle of angular rate b.
        let h = start.frame_momentum();
        let stencil = h.rows(0, 2 * n).norm() * (i0.b * 1e-3).powi(4);
        prop_assert!(velocity_residual(&model, &traj) <= 1e-9 + stencil);
    }

    #[test]
    fn coefficient_shapes(n in 1usize..=4, a in 0.1f64..3.0, b in -5.0f64..5.0, eps in epsilon()) {
        let c = build_coefficients(GeodesicInvariants { a, b }, n, CurvatureProfile::Flat, eps).unwrap();
        let dim = 2 * n + 1;
        prop_assert_eq!(c.dim(), dim);
        for m in [&c.u, &c.e, &c.d] {
            prop_assert_eq!(m.shape(), (dim, dim));
        }
        prop_assert!((&c.e - c.e.transpose()).amax() == 0.0);
        let jl = j_lower(n);
        prop_assert!((&jl + jl.transpose()).amax() == 0.0);
        prop_assert!((&jl * &jl + nalgebra::DMatrix::identity(2 * n - 2, 2 * n - 2)).amax() < 1e-15);
    }

    #[test]
    fn riccati_solutions_are_symmetric(
        n in 1usize..=3,
        a in 0.2f64..2.5,
        b in -4.0f64..4.0,
        eps in epsilon(),
        k in 0.0f64..1.0,
    ) {
        let c = build_coefficients(GeodesicInvariants { a, b }, n, CurvatureProfile::Isotropic(k), eps).unwrap();
        let t = propagate_t(&c, &grid(0.0, 0.99, 34)).unwrap();
        prop_assert!(t.max_asymmetry() <= 1e-10);
        prop_assert!(solve_s(&c, &grid(0.0, 0.95, 20)).unwrap().max_asymmetry() <= 1e-10);
    }

    #[test]
    fn vanishing_b_decouples(n in 2usize..=3, a in 0.2f64..2.5, eps in epsilon()) {
        let c = build_coefficients(GeodesicInvariants { a, b: 0.0 }, n, CurvatureProfile::Flat, eps).unwrap();
        for (_, m) in propagate_t(&c, &grid(0.0, 1.0, 21)).unwrap().valid() {
            prop_assert!(m.view((0, 3), (3, 2 * n - 2)).amax() <= 1e-12);
        }
    }

    #[test]
    fn more_curvature_raises_s(
        n in 1usize..=2,
        a in 0.3f64..2.0,
        b in -3.0f64..3.0,
        eps in epsilon(),
        k1 in 0.0f64..1.0,
        dk in 0.0f64..1.0,
    ) {
        let coeffs =
            |k: f64| build_coefficients(GeodesicInvariants { a, b }, n, CurvatureProfile::Isotropic(k), eps).unwrap();
        // The comparison needs T positive definite, i.e. no conjugate point before t = 0.95.
        let t_hi = propagate_t(&coeffs(k1 + dk), &grid(0.0, 0.95, 60));
        prop_assume!(t_hi.is_ok_and(|t| t
            .matrices
            .iter()
            .skip(1)
            .all(|m| m.as_ref().is_some_and(|m| m.symmetric_eigenvalues().min() > 0.0))));
        let s = |k: f64| solve_s(&coeffs(k), &grid(0.05, 0.95, 10)).unwrap();
        let (lo, hi) = (s(k1), s(k1 + dk));
        for (l, h) in lo.matrices.iter().zip(&hi.matrices) {
            let diff = h.as_ref().unwrap() - l.as_ref().unwrap();
            prop_assert!(diff.symmetric_eigenvalues().min() >= -1e-8);
        }
    }

    #[test]
    fn closed_forms_solve_their_odes(
        a in 0.3f64..3.0,
        eps in 0.3f64..3.0,
        r in 0.2f64..1.5,
        n in 1usize..=3,
        c in 0.1f64..0.9,
    ) {
        let s0 = s0_solution(a, n, c).unwrap();
        let sr = closed_form_sr_eps(a, eps, n, c).unwrap();
        let trig = bonnet_myers_solution(a, r, n, c).unwrap();
        let trig_end = trig.blow_up_time().map_or(0.95, |t0| 0.9 * t0);
        for t in grid(0.05, 0.95, 12) {
            prop_assert!(s0.residual(t) < 1e-7, "S0 at {}", t);
            prop_assert!(sr.residual(t) < 1e-7, "Sr_eps at {}", t);
        }
        for t in grid(0.05, trig_end, 12) {
            prop_assert!(trig.residual(t) < 1e-7, "trig at {}", t);
        }
    }

    #[test]
    fn products_of_solutions_solve_the_symmetric_square(
        a in 0.3f64..3.0,
        eps in 0.3f64..3.0,
        coef in prop::array::uniform4(-2.0f64..2.0),
        t in 0.05f64..1.0,
    ) {
        let basis = symmetric_power_basis(a, eps).unwrap();
        let (f1, f2) = (basis.f1(t), basis.f2(t));
        let lin = |x: f64, y: f64| Jet::constant(x) * f1 + Jet::constant(y) * f2;
        let (u, v) = (lin(coef[0], coef[1]), lin(coef[2], coef[3]));
        let scale = 1.0 + u.0[0].abs().max(v.0[0].abs()).powi(2);
        for g in [u * u, u * v, v * v] {
            prop_assert!(basis.third_order_residual(g, t) < 1e-9 * scale);
        }
    }

    #[test]
    fn conjugate_time_shrinks_with_speed(r in 0.3f64..2.0, n in 1usize..=3, a1 in 1.0f64..30.0, da in 0.0f64..10.0) {
        let t0 = |a: f64| bonnet_myers_solution(a, r, n, 0.5).unwrap().blow_up_time().unwrap_or(f64::INFINITY);
        prop_assert!(t0(a1 + da) <= t0(a1));
    }

    #[test]
    fn comparison_solutions_are_dominated(
        n in 1usize..=2,
        a in 0.3f64..2.0,
        b in -3.0f64..3.0,
        c in 0.2f64..0.8,
        eps in 0.4f64..2.0,
        k in 0.0f64..1.0,
    ) {
        let inv = GeodesicInvariants { a, b };
        let ts = grid(0.05, 0.95, 10);
        let sub = solve_s(&build_coefficients(inv, n, CurvatureProfile::Isotropic(k), Epsilon::Sub).unwrap(), &ts).unwrap();
        let rep = royden_compare(&sub, a, &s0_solution(a, n, c).unwrap(), 1e-6);
        prop_assert!(rep.pass, "sub-Riemannian slack {}", rep.min_slack);
        let riem = solve_s(&build_coefficients(inv, n, CurvatureProfile::Isotropic(k), Epsilon::Value(eps)).unwrap(), &ts).unwrap();
        let rep = epsilon_compare(&riem, &closed_form_sr_eps(a, eps, n, c).unwrap(), 1e-6);
        prop_assert!(rep.pass, "epsilon slack {}", rep.min_slack);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn determinant_routes_agree(n in 1usize..=2, eps in epsilon(), x in point(2, 2.0), c in point(2, 0.5)) {
        let d = 2 * n + 1;
        let model = build_heisenberg(n, eps).unwrap();
        let (x, c) = (x.rows(0, d).into_owned(), c.rows(0, d).into_owned());
        let ts = [0.3, 0.6, 0.9];
        let fd = mcp::jacobian_oracle(&model, &x, &c, &ts);
        let ric = mcp::riccati_determinant(&model, &x, &c, &ts, 1e-8);
        // Near-conjugate pairs are rejected by both routes.
        prop_assume!(fd.is_ok() && ric.is_ok());
        for (f, r) in fd.unwrap().iter().zip(ric.unwrap()) {
            // Tiny determinants carry the finite-difference error in absolute terms.
            assert_relative_eq!(*f, r, epsilon = 1e-9, max_relative = 1e-5);
        }
    }

    #[test]
    fn contraction_bound_holds_pointwise(n in 1usize..=2, x in point(2, 3.0)) {
        let d = 2 * n + 1;
        let model = build_heisenberg(n, Epsilon::Sub).unwrap();
        let ts: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let det = mcp::riccati_determinant(&model, &x.rows(0, d).into_owned(), &DVector::zeros(d), &ts, 1e-8);
        prop_assume!(det.is_ok());
        for (t, v) in ts.iter().zip(det.unwrap()) {
            prop_assert!(v >= (1.0 - t).powi(2 * n as i32 + 3) - 1e-9, "t = {}: {}", t, v);
        }
    }

    #[test]
    fn determinant_is_dilation_invariant(x in point(1, 2.0), lambda in 0.3f64..3.0) {
        let model = build_heisenberg(1, Epsilon::Sub).unwrap();
        let ts = [0.25, 0.5, 0.75];
        let o = DVector::zeros(3);
        let base = mcp::riccati_determinant(&model, &x, &o, &ts, 1e-8);
        prop_assume!(base.is_ok());
        let scaled = mcp::riccati_determinant(&model, &mcp::dilate(&x, lambda), &o, &ts, 1e-8);
        prop_assume!(scaled.is_ok());
        for (p, q) in base.unwrap().iter().zip(scaled.unwrap()) {
            assert_relative_eq!(*p, q, max_relative = 1e-6);
        }
    }

    #[test]
    fn monte_carlo_ignores_scheduling(seed in any::<u64>(), samples in 1usize..3000, threads in 1usize..4) {
        let mut lo = DVector::zeros(3);
        lo[0] = 2.0;
        let exp = ContractionExperiment {
            model: build_heisenberg(1, Epsilon::Sub).unwrap(),
            center: DVector::zeros(3),
            set: BoxSet::unit(lo),
            t_grid: vec![0.2, 0.5, 0.8],
            samples,
            seed,
        };
        let seq = mcp::mc_contraction(&exp, 5, Exec::Sequential).unwrap();
        let par = with_thread_cap(Some(threads), || mcp::mc_contraction(&exp, 5, Exec::Parallel)).unwrap();
        prop_assert_eq!(seq, par);
    }
}

#[test]
fn exponent_is_at_least_the_heisenberg_value() {
    assert_eq!(mcp_exponent(1).0, 5);
    for n in 1..=8 {
        let (exp, c) = mcp_exponent(n);
        assert!(exp >= 2 * n as u32 + 3, "n = {n}: {exp} at c = {c}");
    }
}
