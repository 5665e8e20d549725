//! Quadrature rules.

const GL16: [(f64, f64); 8] = [
    (0.09501250983763745, 0.18945061045506859),
    (0.2816035507792589, 0.1826034150449236),
    (0.45801677765722737, 0.16915651939500262),
    (0.6178762444026438, 0.14959598881657676),
    (0.755404408355003, 0.12462897125553403),
    (0.8656312023878318, 0.09515851168249259),
    (0.9445750230732326, 0.062253523938647706),
    (0.9894009349916499, 0.027152459411754037),
];

/// 16-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL16.iter().map(|&(x, w)| w * (f(c - r * x) + f(c + r * x))).sum::<f64>() * r
}

/// Composite Gauss-Legendre with `panels` equal panels.
pub fn gauss_legendre_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels).map(|k| gauss_legendre(&f, a + k as f64 * h, a + (k + 1) as f64 * h)).sum()
}

/// Composite Simpson on equally spaced samples; `values.len()` must be odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd number (>= 3) of samples");
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Cumulative composite Simpson: entry `2k` holds the integral up to sample `2k`.
/// Odd entries use the trapezoid correction of a half panel.
pub fn simpson_cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut k = 2;
    while k < n {
        out[k] = out[k - 2] + h / 3.0 * (values[k - 2] + 4.0 * values[k - 1] + values[k]);
        // half-panel value by the quadratic through the same three points
        out[k - 1] = out[k - 2] + h / 12.0 * (5.0 * values[k - 2] + 8.0 * values[k - 1] - values[k]);
        k += 2;
    }
    if n >= 2 && n.is_multiple_of(2) {
        let m = n - 1;
        out[m] = out[m - 1] + h / 12.0 * (-values[m - 2] + 8.0 * values[m - 1] + 5.0 * values[m]);
    }
    out
}

fn simpson_rule(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(fa, flm, fm, a, m);
    let right = simpson_rule(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson_rule(fa, fm, fb, a, b);
    adapt(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}
