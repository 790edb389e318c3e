//! Tridiagonal (Thomas) solver.
//!
//! Solves `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]`; `a[0]` and
//! `c[n-1]` are ignored.

use crate::error::{GluingError, Result};

pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if a.len() != n || b.len() != n || c.len() != n {
        return Err(GluingError::DimensionMismatch(format!(
            "tridiagonal bands have lengths {}/{}/{} for rhs of length {n}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut pivot = b[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(GluingError::Degenerate(
            "singular tridiagonal system".into(),
        ));
    }
    cp[0] = c[0] / pivot;
    dp[0] = d[0] / pivot;
    for i in 1..n {
        pivot = b[i] - a[i] * cp[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(GluingError::Degenerate(format!(
                "singular tridiagonal system at row {i}"
            )));
        }
        cp[i] = c[i] / pivot;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / pivot;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_poisson_stencil() {
        // -x'' = 2 on (0,1), x(0) = x(1) = 0 -> x = t(1-t); exact for 3-point stencil.
        let n = 49;
        let h = 1.0 / (n as f64 + 1.0);
        let a = vec![-1.0; n];
        let b = vec![2.0; n];
        let c = vec![-1.0; n];
        let d = vec![2.0 * h * h; n];
        let x = solve_tridiagonal(&a, &b, &c, &d).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let t = (i as f64 + 1.0) * h;
            assert!((xi - t * (1.0 - t)).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_singular() {
        let r = solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(GluingError::Degenerate(_))));
    }

    #[test]
    fn rejects_mismatched_bands() {
        let r = solve_tridiagonal(&[0.0], &[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(GluingError::DimensionMismatch(_))));
    }
}
