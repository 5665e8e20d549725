//! Fixed-step Gragg-Bulirsch-Stoer integration.
//!
//! Each macro step runs the modified midpoint rule with 2, 4, 6 and 8
//! substeps and extrapolates in h^2, giving a one-step method of order 8.

use crate::error::{Error, Result};

const SEQ: [usize; 4] = [2, 4, 6, 8];

/// Nominal order of [`gbs_step`].
pub const ORDER: usize = 2 * SEQ.len();

fn midpoint<F>(f: &F, t: f64, y: &[f64], h: f64, m: usize, out: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let d = y.len();
    let hs = h / m as f64;
    let mut z0 = y.to_vec();
    let mut dz = vec![0.0; d];
    f(t, &z0, &mut dz);
    let mut z1: Vec<f64> = z0.iter().zip(&dz).map(|(a, b)| a + hs * b).collect();
    for k in 1..m {
        f(t + k as f64 * hs, &z1, &mut dz);
        for i in 0..d {
            let z2 = z0[i] + 2.0 * hs * dz[i];
            z0[i] = z1[i];
            z1[i] = z2;
        }
    }
    f(t + h, &z1, &mut dz);
    for i in 0..d {
        out[i] = 0.5 * (z0[i] + z1[i] + hs * dz[i]);
    }
}

/// One extrapolated step from `(t, y)` to `t + h`.
pub fn gbs_step<F>(f: &F, t: f64, y: &[f64], h: f64, out: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let d = y.len();
    let mut prev: Vec<Vec<f64>> = Vec::new();
    for (j, &nj) in SEQ.iter().enumerate() {
        let mut row: Vec<Vec<f64>> = Vec::with_capacity(j + 1);
        let mut base = vec![0.0; d];
        midpoint(f, t, y, h, nj, &mut base);
        row.push(base);
        for k in 1..=j {
            let ratio = (nj as f64 / SEQ[j - k] as f64).powi(2) - 1.0;
            let next: Vec<f64> = (0..d)
                .map(|i| row[k - 1][i] + (row[k - 1][i] - prev[k - 1][i]) / ratio)
                .collect();
            row.push(next);
        }
        prev = row;
    }
    out.copy_from_slice(&prev[SEQ.len() - 1]);
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` in `steps` equal steps.
///
/// `observe` is called at every grid point, including the start.
pub fn integrate<F, O>(f: &F, t0: f64, y0: &[f64], t1: f64, steps: usize, mut observe: O) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut next = vec![0.0; y.len()];
    observe(0, t0, &y);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        gbs_step(f, t, &y, h, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, t: t + h });
        }
        std::mem::swap(&mut y, &mut next);
        observe(k + 1, t0 + (k + 1) as f64 * h, &y);
    }
    Ok(y)
}
