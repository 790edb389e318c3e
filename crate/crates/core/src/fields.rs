//! Scalar fields on the glued nodes, quadrature and weighted sup-norms.

use serde::{Deserialize, Serialize};

use crate::error::{GluingError, Result};
use crate::geometry::{smoothstep5, GluedGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub values: Vec<f64>,
    pub geometry_id: u64,
}

impl GridField {
    pub fn new(g: &GluedGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.len() {
            return Err(GluingError::DimensionMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                g.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GluingError::param(
                "values",
                format!("non-finite value at node {i}"),
            ));
        }
        Ok(Self {
            values,
            geometry_id: g.id(),
        })
    }

    pub fn zeros(g: &GluedGeometry) -> Self {
        Self::constant(g, 0.0)
    }

    pub fn constant(g: &GluedGeometry, c: f64) -> Self {
        Self {
            values: vec![c; g.len()],
            geometry_id: g.id(),
        }
    }

    pub fn from_fn(g: &GluedGeometry, f: impl Fn(usize) -> f64) -> Self {
        Self {
            values: (0..g.len()).map(f).collect(),
            geometry_id: g.id(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn check(&self, g: &GluedGeometry) -> Result<()> {
        if self.geometry_id != g.id() || self.values.len() != g.len() {
            return Err(GluingError::DimensionMismatch(
                "field belongs to a different geometry".into(),
            ));
        }
        Ok(())
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub psi: Vec<f64>,
}

/// Closed-form weight on the neck: `ε cosh t` on `|t| <= L - α`, blended to
/// 1 at `|t| = L` by a quintic smoothstep.
pub fn psi_at(eps: f64, alpha: f64, t: f64) -> f64 {
    let l = -eps.ln();
    let inner = eps * t.cosh();
    let s = smoothstep5((t.abs() - (l - alpha)) / alpha);
    inner + (1.0 - inner) * s
}

pub fn weight(g: &GluedGeometry) -> WeightProfile {
    let psi = (0..g.len())
        .map(|i| match g.t(i) {
            Some(t) => psi_at(g.eps(), g.alpha(), t),
            None => 1.0,
        })
        .collect();
    WeightProfile { psi }
}

impl WeightProfile {
    /// `max ψ^γ |f|`.
    pub fn norm(&self, f: &[f64], gamma: f64) -> f64 {
        self.psi
            .iter()
            .zip(f)
            .fold(0.0, |m, (p, x)| m.max(p.powf(gamma) * x.abs()))
    }
}

pub fn weighted_norm(f: &GridField, gamma: f64, w: &WeightProfile) -> f64 {
    w.norm(&f.values, gamma)
}

pub fn integrate_values(g: &GluedGeometry, f: &[f64]) -> f64 {
    f.iter().zip(&g.vol_weight).map(|(a, v)| a * v).sum()
}

pub fn integrate(g: &GluedGeometry, f: &GridField) -> f64 {
    integrate_values(g, &f.values)
}

pub fn mean_zero_values(g: &GluedGeometry, f: &[f64]) -> Vec<f64> {
    let mean = integrate_values(g, f) / g.total_volume();
    f.iter().map(|x| x - mean).collect()
}

pub fn project_mean_zero(g: &GluedGeometry, f: &GridField) -> GridField {
    GridField {
        values: mean_zero_values(g, &f.values),
        geometry_id: f.geometry_id,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_glued_geometry, GridParams, ModelCap, Side};

    fn geom() -> GluedGeometry {
        let c1 = ModelCap::new(3, 1.0, Side::One).unwrap();
        let c2 = ModelCap::new(3, 2.0, Side::Two).unwrap();
        build_glued_geometry(&c1, &c2, 0.02, 1.5, 1.0, 1.0, &GridParams::default()).unwrap()
    }

    #[test]
    fn weight_values() {
        let g = geom();
        let w = weight(&g);
        assert_eq!(w.psi[0], 1.0);
        assert_eq!(*w.psi.last().unwrap(), 1.0);
        assert!((psi_at(0.02, 1.5, 0.0) - 0.02).abs() < 1e-16);
        let n = w.psi.len();
        for i in 0..n {
            assert_eq!(w.psi[i], w.psi[n - 1 - i]);
            assert!(w.psi[i] <= 1.0 && w.psi[i] > 0.0);
        }
    }

    #[test]
    fn constant_norm_is_constant() {
        let g = geom();
        let w = weight(&g);
        let f = GridField::constant(&g, -3.0);
        assert!((weighted_norm(&f, 0.5, &w) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_weight_has_unit_norm() {
        let g = geom();
        let w = weight(&g);
        let f = GridField::from_fn(&g, |i| w.psi[i].powf(-0.5));
        assert!((weighted_norm(&f, 0.5, &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lump_indicator_projection() {
        let g = geom();
        let f = GridField::from_fn(&g, |i| if i == 0 { 1.0 } else { 0.0 });
        let p = project_mean_zero(&g, &f);
        let vol = g.total_volume();
        assert!((p.values[1] + g.vol_weight[0] / vol).abs() < 1e-14);
        assert!(integrate(&g, &p).abs() < 1e-12 * vol);
    }

    #[test]
    fn constant_projects_to_zero() {
        let g = geom();
        let p = project_mean_zero(&g, &GridField::constant(&g, 1.0));
        assert!(p.max_abs() < 1e-14);
    }

    #[test]
    fn wrong_length_rejected() {
        let g = geom();
        assert!(GridField::new(&g, vec![0.0; 3]).is_err());
    }
}
