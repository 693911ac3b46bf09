//! Parsing of `--n-grid` / `--x-grid` specifications.
//!
//! A grid is a comma-separated list of values or ranges. `a:b:s` steps by `s`
//! from `a` up to `b` inclusive; `a:b:xr` multiplies by `r` instead.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bad grid `{spec}`: {reason}")]
pub struct GridError {
    pub spec: String,
    pub reason: &'static str,
}

fn err(spec: &str, reason: &'static str) -> GridError {
    GridError {
        spec: spec.to_string(),
        reason,
    }
}

fn range_f64(spec: &str, a: f64, b: f64, step: &str) -> Result<Vec<f64>, GridError> {
    let mut out = Vec::new();
    if let Some(r) = step.strip_prefix('x') {
        let r: f64 = r.parse().map_err(|_| err(spec, "bad ratio"))?;
        if r.is_nan() || r <= 1.0 || a.is_nan() || a <= 0.0 {
            return Err(err(spec, "geometric ranges need ratio > 1 and a positive start"));
        }
        let mut k = 0;
        loop {
            let v = a * r.powi(k);
            if v > b * (1.0 + 1e-12) {
                break;
            }
            out.push(v);
            k += 1;
        }
    } else {
        let s: f64 = step.parse().map_err(|_| err(spec, "bad step"))?;
        if s.is_nan() || s <= 0.0 {
            return Err(err(spec, "step must be positive"));
        }
        let count = ((b - a) / s + 1e-9).floor();
        if count < 0.0 {
            return Err(err(spec, "range end is below its start"));
        }
        // Index-based so that 0.05:0.95:0.05 lands exactly on k/20.
        out.extend((0..=count as i64).map(|k| a + k as f64 * s));
    }
    Ok(out)
}

fn parse_items<T: Copy>(spec: &str, each: impl Fn(&str) -> Result<Vec<T>, GridError>) -> Result<Vec<T>, GridError> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(err(spec, "empty item"));
        }
        out.extend(each(item)?);
    }
    if out.is_empty() {
        return Err(err(spec, "grid is empty"));
    }
    Ok(out)
}

/// Real-valued grid, e.g. `0.05:0.95:0.05` or `0.1,0.5,0.9`.
pub fn parse_real_grid(spec: &str) -> Result<Vec<f64>, GridError> {
    parse_items(spec, |item| {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| f64::from_str(s).map_err(|_| err(spec, "not a number"));
        match parts.as_slice() {
            [v] => Ok(vec![num(v)?]),
            [a, b, s] => range_f64(spec, num(a)?, num(b)?, s),
            _ => Err(err(spec, "expected a value or a:b:step")),
        }
    })
}

/// Integer grid, e.g. `2:50:1`, `64:4096:x2` or `2,5,10`.
pub fn parse_int_grid(spec: &str) -> Result<Vec<u64>, GridError> {
    let reals = parse_real_grid(spec)?;
    let mut out: Vec<u64> = Vec::with_capacity(reals.len());
    for v in reals {
        let r = v.round();
        if r < 0.0 || (v - r).abs() > 1e-6 * r.max(1.0) {
            return Err(err(spec, "integer grid produced a non-integer"));
        }
        if out.last() != Some(&(r as u64)) {
            out.push(r as u64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_geometric() {
        assert_eq!(parse_int_grid("2:10:4").unwrap(), vec![2, 6, 10]);
        assert_eq!(parse_int_grid("64:4096:x2").unwrap(), vec![64, 128, 256, 512, 1024, 2048, 4096]);
        assert_eq!(parse_int_grid("2,5,10").unwrap(), vec![2, 5, 10]);
        let x = parse_real_grid("0.05:0.95:0.05").unwrap();
        assert_eq!(x.len(), 19);
        assert!((x[18] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_int_grid("").is_err());
        assert!(parse_int_grid("1:2").is_err());
        assert!(parse_real_grid("a").is_err());
        assert!(parse_real_grid("1:0:1").is_err());
        assert!(parse_int_grid("1:2:0.5").is_err());
        assert!(parse_real_grid("0:1:x2").is_err());
    }
}
