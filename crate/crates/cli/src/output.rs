use std::fs;
use std::path::{Path, PathBuf};

use ppp_core::experiments::Sample;
use ppp_core::linalg::Vector;

use crate::error::{CliError, CliResult};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub const TRACE_HEADER: &str = "k,residual,w_err,u_err,intertwine";

pub fn trace_csv(history: &[Sample]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for s in history {
        let intertwine = s.intertwine.map(num).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", s.k, num(s.residual), num(s.w_err), num(s.u_err), intertwine));
    }
    out
}

/// Row-major image: one CSV line per grid row.
pub fn image_csv(image: &Vector, side: usize) -> String {
    let mut out = String::new();
    for row in 0..side {
        let line: Vec<String> = (0..side).map(|col| num(image[row * side + col])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn resolve(out_dir: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

pub fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn trace_has_fixed_header() {
        let s = Sample { k: 3, residual: 0.5, w_err: 0.25, u_err: 0.125, intertwine: None };
        let csv = trace_csv(&[s]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 5);
    }
}
