//! Log-log least squares, used for every `O(ε^p)` check.

use serde::{Deserialize, Serialize};

use crate::error::{GluingError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Ordinary least squares of `log y` against `log x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(GluingError::DimensionMismatch(format!(
            "{} abscissae and {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(GluingError::param("xs", "need at least 3 points"));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(GluingError::param(
            "ys",
            format!("cannot take the log of {v}"),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(GluingError::Degenerate("all abscissae are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// `max / min` of a positive sample, the spread used for "stable constant"
/// checks.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let min = values.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_square() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let f = fit_slope(&xs, &xs).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14 && f.residual < 1e-14);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let f = fit_slope(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && f.residual < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
        assert!(fit_slope(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
