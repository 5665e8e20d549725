//! Parsing of `lo:hi:step` ranges and comma-separated lists.

use std::str::FromStr;

/// A list of sample values, given on the command line either as
/// `lo:hi:step` (inclusive) or as `v1,v2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("not a number: {v:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [lo, hi, step] => {
                let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
                if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
                    return Err(format!("bad range {s:?}: need lo <= hi and step > 0"));
                }
                let count = ((hi - lo) / step + 1e-9).floor() as usize;
                if count > 10_000_000 {
                    return Err(format!("range {s:?} has too many points"));
                }
                // Rounded so that 0.1:0.9:0.1 prints as 0.3 rather than 0.30000000000000004.
                (0..=count).map(|k| ((lo + step * k as f64) * 1e12).round() / 1e12).collect()
            }
            [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
            _ => return Err(format!("expected lo:hi:step or a comma-separated list, got {s:?}")),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite value in {s:?}"));
        }
        Ok(Grid(values))
    }
}
