//! Finite-volume Laplacian on a path graph.
//!
//! Every discrete manifold in this crate (the glued manifold and the two
//! model caps) is a chain of nodes `0 - 1 - ... - (len-1)` with a positive
//! volume per node and a positive conductance per edge. The operator
//!
//! ```text
//! (Δf)_i = [ k_i (f_{i+1} - f_i) - k_{i-1} (f_i - f_{i-1}) ] / V_i
//! ```
//!
//! is self-adjoint for the node-weight inner product and its volume
//! integral telescopes to zero, so the divergence theorem and Green's
//! formula hold exactly at the discrete level.

use crate::banded::solve_tridiagonal;
use crate::error::{GluingError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PathLaplacian {
    conductance: Vec<f64>,
    volume: Vec<f64>,
}

impl PathLaplacian {
    pub fn new(conductance: Vec<f64>, volume: Vec<f64>) -> Result<Self> {
        if volume.len() < 2 || conductance.len() + 1 != volume.len() {
            return Err(GluingError::DimensionMismatch(format!(
                "{} conductances for {} nodes",
                conductance.len(),
                volume.len()
            )));
        }
        if let Some(v) = volume.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(GluingError::param(
                "volume",
                format!("node volume {v} is not positive"),
            ));
        }
        if let Some(k) = conductance.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(GluingError::param(
                "conductance",
                format!("edge conductance {k} is not positive"),
            ));
        }
        Ok(Self {
            conductance,
            volume,
        })
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    pub fn volume(&self) -> &[f64] {
        &self.volume
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.len(), "field length does not match operator");
        let n = self.len();
        let mut out = vec![0.0; n];
        for (e, k) in self.conductance.iter().enumerate() {
            let flux = k * (f[e + 1] - f[e]);
            out[e] += flux;
            out[e + 1] -= flux;
        }
        for (o, v) in out.iter_mut().zip(&self.volume) {
            *o /= v;
        }
        out
    }

    /// Discrete Dirichlet form `Σ_e k_e (f_{e+1} - f_e)(g_{e+1} - g_e)`,
    /// i.e. `∫ g(∇f, ∇g) dvol`.
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> f64 {
        self.conductance
            .iter()
            .enumerate()
            .map(|(e, k)| k * (f[e + 1] - f[e]) * (g[e + 1] - g[e]))
            .sum()
    }

    /// Solves `Δu = s` on the whole path by integrating edge fluxes from
    /// node 0. Requires `Σ s_i V_i = 0` (up to `tol` relative); the free
    /// additive constant is fixed by `u[gauge_node] = gauge_value`.
    pub fn solve_compatible(
        &self,
        source: &[f64],
        gauge_node: usize,
        gauge_value: f64,
        tol: f64,
    ) -> Result<Vec<f64>> {
        let n = self.len();
        if source.len() != n || gauge_node >= n {
            return Err(GluingError::DimensionMismatch(format!(
                "source of length {} / gauge node {gauge_node} for {n} nodes",
                source.len()
            )));
        }
        let total: f64 = source.iter().zip(&self.volume).map(|(s, v)| s * v).sum();
        let scale: f64 = source
            .iter()
            .zip(&self.volume)
            .map(|(s, v)| (s * v).abs())
            .sum();
        if total.abs() > tol * scale.max(f64::MIN_POSITIVE) {
            return Err(GluingError::Precondition(format!(
                "incompatible source: integral {total:e} (scale {scale:e})"
            )));
        }
        let mut u = vec![0.0; n];
        let mut flux = 0.0;
        for e in 0..n - 1 {
            flux += source[e] * self.volume[e];
            u[e + 1] = u[e] + flux / self.conductance[e];
        }
        let shift = gauge_value - u[gauge_node];
        for x in &mut u {
            *x += shift;
        }
        Ok(u)
    }

    /// Solves `Δv = s` on nodes strictly between `lo` and `hi` with
    /// `v(lo) = v(hi) = 0`; the result is extended by zero.
    pub fn solve_dirichlet(&self, source: &[f64], lo: usize, hi: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if source.len() != n || hi >= n || hi < lo + 2 {
            return Err(GluingError::DimensionMismatch(format!(
                "Dirichlet window [{lo}, {hi}] on {n} nodes"
            )));
        }
        let m = hi - lo - 1;
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for r in 0..m {
            let i = lo + 1 + r;
            let kl = self.conductance[i - 1];
            let kr = self.conductance[i];
            a[r] = kl;
            b[r] = -(kl + kr);
            c[r] = kr;
            d[r] = self.volume[i] * source[i];
        }
        let x = solve_tridiagonal(&a, &b, &c, &d)?;
        let mut v = vec![0.0; n];
        v[lo + 1..hi].copy_from_slice(&x);
        Ok(v)
    }
}
