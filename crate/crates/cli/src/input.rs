//! Sample files: one point per row (`q + 1` columns) or one angle per row.

use crate::error::{CliError, CliResult};
use sphere_unif::{Dimension, Sample};
use std::f64::consts::TAU;
use std::io::Read;
use std::path::Path;

/// Rows whose norm is within this distance of 1 are renormalised.
pub const NORM_SLACK: f64 = 1e-3;

pub struct InputOptions {
    /// Period of circular time data; values `t` map to angles `2πt/period`.
    pub period: Option<f64>,
    pub q: Option<u32>,
}

pub fn read_sample(path: &Path, opts: &InputOptions) -> CliResult<Sample> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    parse_sample(&text, opts)
}

pub fn parse_sample(text: &str, opts: &InputOptions) -> CliResult<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            // A non-numeric first row is a header.
            Err(_) if rows.is_empty() && width.is_none() => {
                width = Some(record.len());
                continue;
            }
            Err(_) => return Err(CliError::Data(format!("line {line}: non-numeric value in {:?}", record.iter().collect::<Vec<_>>()))),
        };
        if let Some(w) = width {
            if values.len() != w {
                return Err(CliError::Data(format!("line {line}: expected {w} columns, found {}", values.len())));
            }
        }
        width = Some(values.len());
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Data(format!("line {line}: non-finite value")));
        }
        rows.push(values);
        if rows.len() == 1 && opts.period.is_some() && rows[0].len() != 1 {
            return Err(CliError::Usage("--period applies to single-column circular data".into()));
        }
        let row = rows.last_mut().expect("just pushed");
        if row.len() == 1 {
            let t = row[0];
            let angle = opts.period.map_or(t, |p| TAU * t / p);
            *row = vec![angle.cos(), angle.sin()];
        } else {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_SLACK {
                return Err(CliError::Data(format!("line {line}: norm {norm} is not within {NORM_SLACK} of 1")));
            }
        }
    }
    if rows.len() < 2 {
        return Err(CliError::Data(format!("need n ≥ 2 points, got {}", rows.len())));
    }
    let q = rows[0].len() as u32 - 1;
    if let Some(expected) = opts.q {
        if expected != q {
            return Err(CliError::Data(format!("dimension mismatch: --q {expected} but the data lie on S^{q}")));
        }
    }
    Ok(Sample::with_tolerance(Dimension::new(q)?, &rows, NORM_SLACK)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> InputOptions {
        InputOptions { period: None, q: None }
    }

    #[test]
    fn vectors_with_header() {
        let s = parse_sample("x,y,z\n1,0,0\n0,0.9995,0\n", &opts()).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.q().get(), 2);
        assert!((s.row(1)[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circular_times() {
        let o = InputOptions { period: Some(24.0), q: None };
        let s = parse_sample("6\n12\n", &o).unwrap();
        assert!(s.row(0)[0].abs() < 1e-15 && (s.row(0)[1] - 1.0).abs() < 1e-15);
        assert!((s.row(1)[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_sample("1,0\n0,1\n0.5,0.5\n", &opts()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = parse_sample("1,0\nfoo,1\n", &opts()).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse_sample("1,0\n0,1,0\n", &opts()).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn needs_two_points() {
        let e = parse_sample("0.3\n", &opts()).unwrap_err();
        assert!(e.to_string().contains("need n ≥ 2"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn dimension_check() {
        let o = InputOptions { period: None, q: Some(2) };
        assert!(matches!(parse_sample("1,0\n0,1\n", &o), Err(CliError::Data(_))));
    }
}
