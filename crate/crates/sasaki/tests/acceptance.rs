//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sasaki::comparison::{
    bonnet_myers_solution, closed_form_sr_eps, epsilon_compare, first_root_x0, royden_compare, s0_solution,
    symmetric_power_basis, ComparisonReport,
};
use sasaki::exec::Exec;
use sasaki::geodesics::{self, hamiltonian, heisenberg_exponential, invariants, GeodesicInvariants, GeodesicState};
use sasaki::mcp::{self, BoxSet, ContractionExperiment};
use sasaki::models::{build_heisenberg, curvature_check, CurvatureProfile, Epsilon};
use sasaki::riccati::{build_coefficients, s22_lower_bound_check, seed_error_slope, solve_s};

type Outcome = Result<String, String>;

/// Name, time budget in seconds and check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(2 * n + 1, |_, _| r.random_range(-scale..scale))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn structure_identities() -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        let points: Vec<_> = (0..10).map(|_| random_point(&mut r, n, 3.0)).collect();
        for eps in [Epsilon::Value(1.0), Epsilon::Sub] {
            let model = build_heisenberg(n, eps).map_err(|e| e.to_string())?;
            let rep = curvature_check(&model, &points, 1e-10).map_err(|e| format!("n={n} {eps}: {e}"))?;
            worst = worst.max(rep.max_residual());
        }
    }
    check(worst < 1e-10, format!("max residual {worst:.2e}"))
}

fn integrator_vs_oracle() -> Outcome {
    let mut r = rng(2);
    let (mut pos, mut ham, mut inv): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..100 {
        let n = 1 + k % 2;
        let model = build_heisenberg(n, Epsilon::Sub).unwrap();
        let mut p = DVector::from_fn(2 * n + 1, |_, _| r.random_range(-1.0..1.0));
        p *= r.random_range(0.0..5.0) / p.norm();
        let start = GeodesicState::new(DVector::zeros(2 * n + 1), p.clone());
        let traj = geodesics::integrate(&model, &start, 1.0, 1000).map_err(|e| e.to_string())?;
        let h0 = hamiltonian(&model, &start);
        let i0 = invariants(&model, &start);
        for s in &traj {
            pos = pos.max((&s.q - heisenberg_exponential(n, &p, s.t)).amax());
            ham = ham.max((hamiltonian(&model, s) - h0).abs() / h0.max(1.0));
            let i = invariants(&model, s);
            inv = inv.max((i.a - i0.a).abs()).max((i.b - i0.b).abs());
        }
    }
    check(
        pos < 1e-8 && ham < 1e-10 && inv < 1e-9,
        format!("position {pos:.2e}, hamiltonian drift {ham:.2e}, (a,b) drift {inv:.2e}"),
    )
}

fn riccati_asymptotics() -> Outcome {
    let mut worst = f64::INFINITY;
    let cases = [(1.0, 0.0, 1, CurvatureProfile::Flat), (1.3, 0.7, 2, CurvatureProfile::Isotropic(0.5))];
    for variant in [Epsilon::Sub, Epsilon::Value(0.5), Epsilon::Value(1.0), Epsilon::Value(2.0)] {
        for (a, b, n, profile) in &cases {
            let c = build_coefficients(GeodesicInvariants { a: *a, b: *b }, *n, profile.clone(), variant)
                .map_err(|e| e.to_string())?;
            worst = worst.min(seed_error_slope(&c, 9).map_err(|e| e.to_string())?);
        }
    }
    check(worst >= 3.9, format!("min fitted slope {worst:.3}"))
}

fn closed_form_residuals() -> Outcome {
    let grid = |lo: f64, hi: f64| (0..200).map(move |k| lo + (hi - lo) * k as f64 / 199.0);
    let mut worst = [0.0f64; 5];
    for (a, n, c) in [(1.0, 2, 0.5), (0.6, 1, 0.3), (2.2, 3, 0.8)] {
        let s0 = s0_solution(a, n, c).unwrap();
        worst[0] = grid(0.0, 0.99).map(|t| s0.residual(t)).fold(worst[0], f64::max);
    }
    for (a, eps, n, c) in [(1.3, 0.7, 1, 0.4), (0.8, 1.5, 2, 0.5), (2.0, 0.5, 3, 0.7)] {
        let sr = closed_form_sr_eps(a, eps, n, c).unwrap();
        worst[1] = grid(0.05, 1.0).map(|t| sr.residual(t)).fold(worst[1], f64::max);
    }
    for (a, eps) in [(1.0, 1.0), (1.3, 0.7), (3.0, 2.0)] {
        let b = symmetric_power_basis(a, eps).unwrap();
        for t in grid(0.05, 1.0) {
            for f in [b.f1(t), b.f2(t)] {
                worst[2] = worst[2].max(b.second_order_residual(f, t));
            }
            for g in b.squares(t) {
                worst[3] = worst[3].max(b.third_order_residual(g, t));
            }
        }
    }
    for (a, r, n, c) in [(1.3, 0.8, 1, 0.5), (2.0, 1.0, 2, 0.4), (3.0, 1.2, 3, 0.6)] {
        let sr = bonnet_myers_solution(a, r, n, c).unwrap();
        worst[4] = grid(0.05, 0.95).map(|t| sr.residual(t)).fold(worst[4], f64::max);
    }
    let names = ["S0", "Sr_eps", "second-order basis", "symmetric square", "trig Sr"];
    let detail = names.iter().zip(worst).map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", ");
    check(worst.iter().all(|w| *w < 1e-7), detail)
}

fn scalar_bounds() -> Outcome {
    let mut r = rng(5);
    let grid: Vec<f64> = (1..=95).map(|k| k as f64 / 100.0).collect();
    let mut worst = f64::INFINITY;
    for variant in [Epsilon::Sub, Epsilon::Value(0.5), Epsilon::Value(0.7), Epsilon::Value(2.0)] {
        for k in [0.0, 0.5, 1.0] {
            for n in [1, 2] {
                let inv = GeodesicInvariants { a: r.random_range(0.3..2.5), b: r.random_range(-3.0..3.0) };
                let c = build_coefficients(inv, n, CurvatureProfile::Isotropic(k), variant).unwrap();
                let traj = solve_s(&c, &grid).map_err(|e| e.to_string())?;
                match s22_lower_bound_check(&traj, 1e-8) {
                    Ok(rep) => worst = worst.min(rep.min_slack),
                    Err(e) => return Err(format!("{variant} k={k} n={n}: {e}")),
                }
            }
        }
    }
    check(worst >= -1e-8, format!("min slack {worst:.3e}"))
}

fn comparison_dominance() -> Outcome {
    let mut r = rng(6);
    let grid: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    let mut sub = Vec::new();
    let mut eps = Vec::new();
    for k in [0.0, 0.5, 1.0] {
        for n in [1, 2] {
            for _ in 0..4 {
                let inv = GeodesicInvariants { a: r.random_range(0.3..2.0), b: r.random_range(-3.0..3.0) };
                let c = r.random_range(0.2..0.8);
                let coeffs = build_coefficients(inv, n, CurvatureProfile::Isotropic(k), Epsilon::Sub).unwrap();
                let traj = solve_s(&coeffs, &grid).map_err(|e| e.to_string())?;
                sub.push(royden_compare(&traj, inv.a, &s0_solution(inv.a, n, c).unwrap(), 1e-6));
                let e = r.random_range(0.4..2.0);
                let coeffs = build_coefficients(inv, n, CurvatureProfile::Isotropic(k), Epsilon::Value(e)).unwrap();
                let traj = solve_s(&coeffs, &grid).map_err(|e| e.to_string())?;
                eps.push(epsilon_compare(&traj, &closed_form_sr_eps(inv.a, e, n, c).unwrap(), 1e-6));
            }
        }
    }
    let sub = ComparisonReport::merge(sub, 1e-6);
    let eps = ComparisonReport::merge(eps, 1e-6);
    check(
        sub.pass && eps.pass,
        format!("sub-Riemannian min slack {:.3e}, epsilon min slack {:.3e}", sub.min_slack, eps.min_slack),
    )
}

fn mcp_quantitative() -> Outcome {
    let ts: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let mut r = rng(7);
    let mut details = Vec::new();
    let mut ok = true;
    for n in [1, 2] {
        let model = build_heisenberg(n, Epsilon::Sub).unwrap();
        let exponent = 2 * n as u32 + 3;
        let center = DVector::zeros(2 * n + 1);
        let mut worst = f64::INFINITY;
        let mut done = 0;
        for _ in 0..400 {
            if done == 200 {
                break;
            }
            let x = random_point(&mut r, n, 2.0);
            // Near-conjugate geodesics are skipped.
            let Ok(dets) = mcp::riccati_determinant(&model, &x, &center, &ts, 1e-8) else { continue };
            for (t, d) in ts.iter().zip(dets) {
                worst = worst.min(d - (1.0 - t).powi(exponent as i32));
            }
            done += 1;
        }
        let mut lo = DVector::zeros(2 * n + 1);
        lo[0] = 3.0;
        let exp = ContractionExperiment {
            model,
            center,
            set: BoxSet::unit(lo),
            t_grid: ts.clone(),
            samples: 200_000,
            seed: 42,
        };
        let rep = mcp::mc_contraction(&exp, exponent, Exec::default()).map_err(|e| e.to_string())?;
        let mc_slack = rep.rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        ok &= done == 200 && worst >= -1e-6 && rep.pass;
        details.push(format!("n={n} N={exponent}: pointwise slack {worst:.3e}, MC slack {mc_slack:.3e}"));
    }
    check(ok, details.join("; "))
}

fn determinant_routes() -> Outcome {
    let mut r = rng(8);
    let ts = [0.2, 0.5, 0.8];
    let mut details = Vec::new();
    let mut ok = true;
    for eps in [Epsilon::Sub, Epsilon::Value(0.5), Epsilon::Value(1.0), Epsilon::Value(2.0)] {
        let model = build_heisenberg(1, eps).unwrap();
        let mut worst: f64 = 0.0;
        let mut done = 0;
        for _ in 0..200 {
            if done == 50 {
                break;
            }
            let x = random_point(&mut r, 1, 2.0);
            let center = random_point(&mut r, 1, 0.5);
            let (Ok(fd), Ok(ric)) = (
                mcp::jacobian_oracle(&model, &x, &center, &ts),
                mcp::riccati_determinant(&model, &x, &center, &ts, 1e-8),
            ) else {
                continue;
            };
            for (f, q) in fd.iter().zip(&ric) {
                worst = worst.max((f - q).abs() / f.abs());
            }
            done += 1;
        }
        ok &= done == 50 && worst < 1e-6;
        details.push(format!("{eps}: {worst:.1e} over {done}"));
    }
    check(ok, format!("max relative gap {}", details.join(", ")))
}

fn laplacian_comparison() -> Outcome {
    let model = build_heisenberg(1, Epsilon::Sub).unwrap();
    let mut r = rng(9);
    let points: Vec<_> = (0..100).map(|_| random_point(&mut r, 1, 2.0)).collect();
    let center = DVector::zeros(3);
    let rep = mcp::laplacian_comparison_check(&model, &points, &center, 5, 1e-3, Exec::default());
    check(
        rep.pass && rep.rows.len() + rep.skipped == 100,
        format!("max {:.6} (bound {}), {} points evaluated, {} skipped", rep.max_value, rep.bound, rep.rows.len(), rep.skipped),
    )
}

fn bonnet_myers() -> Outcome {
    let x0 = first_root_x0();
    let root_ok = (x0 - 4.493409457909064).abs() <= 1e-9;
    let mut mismatches = Vec::new();
    let mut scanned = 0;
    for r in [0.5, 1.0, 2.0] {
        for k in 0..=40 {
            let a = (2.0 * x0 / r) * (0.8 + 0.01 * k as f64);
            let product = a * r / (2.0 * x0);
            if (product - 1.0).abs() <= 0.005 {
                continue;
            }
            for n in [1, 2] {
                let sr = bonnet_myers_solution(a, r, n, 0.5).unwrap();
                scanned += 1;
                if sr.diverges() != (product > 1.0) {
                    mismatches.push(format!("a={a:.4} r={r} n={n}"));
                }
            }
        }
    }
    let mut limits: f64 = 0.0;
    for (a, r, n, c) in [(1.3, 0.8, 1, 0.5), (1.3, 0.8, 2, 0.5), (0.9, 1.5, 3, 0.3)] {
        let sr = bonnet_myers_solution(a, r, n, c).unwrap();
        let t = 1e-3;
        let m = sr.eval(t).map_err(|e| e.to_string())?;
        let got = [t.powi(3) * m[(0, 0)], t * t * m[(0, 1)], t * m[(1, 1)]];
        for (g, l) in got.iter().zip(sr.small_t_limits()) {
            limits = limits.max((g - l).abs() / l.abs());
        }
    }
    check(
        root_ok && mismatches.is_empty() && limits < 1e-4,
        format!(
            "x0 = {x0:.15}, blow-up scan {}/{scanned} consistent, small-t limits rel err {limits:.1e}{}",
            scanned - mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(" (mismatch: {})", mismatches.join(" ")) }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("structure identities", 1, structure_identities),
        ("integrator vs closed-form geodesics", 10, integrator_vs_oracle),
        ("Riccati asymptotic seed", 5, riccati_asymptotics),
        ("closed-form residuals", 5, closed_form_residuals),
        ("scalar bounds", 5, scalar_bounds),
        ("comparison dominance", 30, comparison_dominance),
        ("measure contraction", 60, mcp_quantitative),
        ("determinant route equivalence", 30, determinant_routes),
        ("Laplacian comparison", 10, laplacian_comparison),
        ("Bonnet-Myers", 30, bonnet_myers),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.2}s / {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
