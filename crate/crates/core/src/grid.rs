//! Grids of tuning parameters.

use crate::error::{Error, Result};
use crate::kernels::Family;

/// Default smooth-maximum grid: 0.01, 0.1 to 5 by 0.1, 5.2 to 10 by 0.2,
/// 11 to 20 by 1 and 25 to 50 by 5 (92 values).
pub fn default_kappa_grid() -> Vec<f64> {
    let mut g = vec![0.01];
    g.extend((1..=50).map(|i| i as f64 / 10.0));
    g.extend((26..=50).map(|i| i as f64 / 5.0));
    g.extend((11..=20).map(|i| i as f64));
    g.extend((5..=10).map(|i| 5.0 * i as f64));
    g
}

/// Default Poisson grid `a/50`, `a = 1..49`.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=49).map(|a| a as f64 / 50.0).collect()
}

pub fn default_grid(family: Family) -> Vec<f64> {
    match family {
        Family::SmoothMax => default_kappa_grid(),
        Family::Poisson => default_rho_grid(),
    }
}

/// Parses a grid given as a comma list of values and `start:stop:step` ranges,
/// e.g. `0.01,0.1:5:0.1`. Values are validated for `family`, sorted and
/// deduplicated.
pub fn parse_grid(text: &str, family: Family) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let pieces: Vec<&str> = part.split(':').collect();
        match pieces.as_slice() {
            [v] => out.push(parse_num(v)?),
            [a, b, s] => {
                let (a, b, s) = (parse_num(a)?, parse_num(b)?, parse_num(s)?);
                if !(s > 0.0) || b < a {
                    return Err(Error::InvalidParameter(format!("bad grid range '{part}'")));
                }
                let steps = ((b - a) / s + 1e-9).floor() as usize;
                // Multiply rather than accumulate so decimal steps stay exact.
                out.extend((0..=steps).map(|i| round_decimal(a + i as f64 * s)));
            }
            _ => return Err(Error::InvalidParameter(format!("bad grid element '{part}'"))),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    for &v in &out {
        family.check_lambda(v)?;
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("'{s}' is not a number")))
}

fn round_decimal(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_grid_shape() {
        let g = default_kappa_grid();
        assert_eq!(g.len(), 92);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[1], 0.1);
        assert_eq!(g[50], 5.0);
        assert_eq!(g[51], 5.2);
        assert_eq!(g[75], 10.0);
        assert_eq!(g[76], 11.0);
        assert_eq!(*g.last().unwrap(), 50.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.contains(&0.7) && g.contains(&5.8));
    }

    #[test]
    fn rho_grid_shape() {
        let g = default_rho_grid();
        assert_eq!(g.len(), 49);
        assert_eq!(g[44], 0.9);
        assert!(g.contains(&0.24));
    }

    #[test]
    fn parsing() {
        let g = parse_grid("0.01, 0.1:0.5:0.1", Family::SmoothMax).unwrap();
        assert_eq!(g, vec![0.01, 0.1, 0.2, 0.3, 0.4, 0.5]);
        let g = parse_grid("0.5,0.25,0.5", Family::Poisson).unwrap();
        assert_eq!(g, vec![0.25, 0.5]);
        assert!(parse_grid("1.5", Family::Poisson).is_err());
        assert!(parse_grid("", Family::SmoothMax).is_err());
        assert!(parse_grid("1:0:1", Family::SmoothMax).is_err());
        assert!(parse_grid("a", Family::SmoothMax).is_err());
    }

    #[test]
    fn parsed_default_matches() {
        let g = parse_grid("0.01,0.1:5:0.1,5.2:10:0.2,11:20:1,25:50:5", Family::SmoothMax).unwrap();
        assert_eq!(g, default_kappa_grid());
    }
}
