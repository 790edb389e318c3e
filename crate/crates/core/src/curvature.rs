//! Scalar curvature of the glued metric, the Yamabe right-hand side and the
//! deformation pairing.

use serde::{Deserialize, Serialize};

use crate::error::{GluingError, Result};
use crate::fields::{integrate_values, GridField};
use crate::geometry::{Chart, Cutoff, GluedGeometry, Side, RESOLUTION_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalConstants {
    pub m: usize,
    pub n: usize,
    /// `-(m-2) / (4(m-1))`.
    pub c_m: f64,
    /// `(m+2)/(m-2)`.
    pub p_exp: f64,
    /// `4/(n-2)`.
    pub neck_exp: f64,
}

impl ConformalConstants {
    pub fn new(m: usize, n: usize) -> Self {
        let mf = m as f64;
        Self {
            m,
            n,
            c_m: -(mf - 2.0) / (4.0 * (mf - 1.0)),
            p_exp: (mf + 2.0) / (mf - 2.0),
            neck_exp: 4.0 / (n as f64 - 2.0),
        }
    }

    /// `(n-2) / (4(n-1))`, the coefficient relating `S` to the conformal
    /// Laplacian on the neck.
    pub fn c_n(&self) -> f64 {
        let nf = self.n as f64;
        (nf - 2.0) / (4.0 * (nf - 1.0))
    }
}

/// Relative error of the central second difference on `e^{±kt}`.
pub fn second_difference_error(n: usize, h: f64) -> f64 {
    let k = (n as f64 - 2.0) / 2.0;
    let kh = k * h;
    // 2(cosh x - 1)/x^2 - 1, series for small x to avoid cancellation.
    if kh < 1e-2 {
        let x2 = kh * kh;
        x2 / 12.0 + x2 * x2 / 360.0
    } else {
        2.0 * (kh.cosh() - 1.0) / (kh * kh) - 1.0
    }
}

pub fn check_resolution(n: usize, h: f64) -> Result<()> {
    let e = second_difference_error(n, h);
    if e > RESOLUTION_TOL {
        return Err(GluingError::Resolution(format!(
            "second-difference residual {e:e} on the exact neck exceeds {RESOLUTION_TOL:e} at h_t = {h}"
        )));
    }
    Ok(())
}

/// `c_n^{-1} u^{-(n+2)/(n-2)} (-u'' + k² u)` on a uniform grid, with `u''`
/// from central differences of the closed-form `u`.
pub fn neck_scalar_curvature(n: usize, ts: &[f64], h: f64, u: impl Fn(f64) -> f64) -> Vec<f64> {
    let consts = ConformalConstants::new(n, n);
    let k = (n as f64 - 2.0) / 2.0;
    let pw = (n as f64 + 2.0) / (n as f64 - 2.0);
    ts.iter()
        .map(|&t| {
            let u0 = u(t);
            let upp = (u(t + h) - 2.0 * u0 + u(t - h)) / (h * h);
            (-upp + k * k * u0) / (consts.c_n() * u0.powf(pw))
        })
        .collect()
}

/// A curvature deformation profile `K_i`, living on the lump of its side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationProfile {
    pub side: Side,
    /// One value per glued node.
    pub profile: Vec<f64>,
    pub pairing_integral: f64,
    pub quad_coeff: f64,
}

impl DeformationProfile {
    /// Profile concentrated on the lump of `side` with the given integral.
    pub fn on_lump(g: &GluedGeometry, side: Side, pairing: f64, quad_coeff: f64) -> Self {
        let node = g.lump_index(side);
        let mut profile = vec![0.0; g.len()];
        profile[node] = pairing / g.vol_weight[node];
        Self {
            side,
            profile,
            pairing_integral: pairing,
            quad_coeff,
        }
    }
}

/// `∫ K_i dvol`. The profile has to vanish on the neck.
pub fn pairing_integral(h: &DeformationProfile, g: &GluedGeometry) -> Result<f64> {
    if h.profile.len() != g.len() {
        return Err(GluingError::DimensionMismatch(format!(
            "profile of length {} for {} nodes",
            h.profile.len(),
            g.len()
        )));
    }
    let lump = g.lump_index(h.side);
    if let Some(i) = h
        .profile
        .iter()
        .enumerate()
        .position(|(i, v)| i != lump && *v != 0.0)
    {
        return Err(GluingError::Support(format!(
            "deformation profile of side {} is nonzero at node {i} ({})",
            h.side.index(),
            g.chart(i).as_str()
        )));
    }
    Ok(integrate_values(g, &h.profile))
}

/// The deformation `g_ε + r h_1 + s h_2`. The curvature it adds is
/// `σ [(r + q r²) K_1 + (s + q s²) K_2]`, where `σ` converts the reported
/// units of `r, s` (in which `∫ S_{g_ε} = -ε^{n-2}`) back to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deformation {
    pub r: f64,
    pub s: f64,
    pub sigma: f64,
    pub k1: DeformationProfile,
    pub k2: DeformationProfile,
}

impl Deformation {
    pub fn validate(&self, g: &GluedGeometry) -> Result<()> {
        if self.k1.side != Side::One || self.k2.side != Side::Two {
            return Err(GluingError::param(
                "deform",
                "profiles must be (side 1, side 2)",
            ));
        }
        for k in [&self.k1, &self.k2] {
            let p = pairing_integral(k, g)?;
            if p == 0.0 {
                return Err(GluingError::Assumption(format!(
                    "Ricci-flat cap on side {}: the curvature pairing vanishes, so the deformation cannot correct the scalar curvature",
                    k.side.index()
                )));
            }
            if (p - 1.0).abs() > 1e-12 {
                return Err(GluingError::param(
                    "pairing",
                    format!(
                        "profile of side {} integrates to {p}, expected 1",
                        k.side.index()
                    ),
                ));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(GluingError::param(
                "sigma",
                format!("{} is not positive", self.sigma),
            ));
        }
        Ok(())
    }

    /// The added curvature field.
    pub fn curvature(&self) -> Vec<f64> {
        let a = self.r + self.k1.quad_coeff * self.r * self.r;
        let b = self.s + self.k2.quad_coeff * self.s * self.s;
        self.k1
            .profile
            .iter()
            .zip(&self.k2.profile)
            .map(|(x, y)| self.sigma * (a * x + b * y))
            .collect()
    }
}

/// Scalar curvature of `g_ε` (or of its deformation) on every node.
pub fn scalar_curvature(g: &GluedGeometry) -> Result<GridField> {
    check_resolution(g.n(), g.neck.h_t)?;
    let n = g.n();
    let h = g.neck.h_t;
    let consts = ConformalConstants::new(n, n);
    let k = g.neck.decay();
    let pw = (n as f64 + 2.0) / (n as f64 - 2.0);
    let cn = consts.c_n();
    let big_n = g.neck.len();
    let u = &g.u_eps;
    let t = &g.neck.t_nodes;
    let mut s = vec![0.0; g.len()];
    for j in 0..big_n {
        let um = if j == 0 {
            g.profile.eval(t[0] - h)
        } else {
            u[j - 1]
        };
        let up = if j + 1 == big_n {
            g.profile.eval(t[j] + h)
        } else {
            u[j + 1]
        };
        let upp = (up - 2.0 * u[j] + um) / (h * h);
        s[j + 1] = (-upp + k * k * u[j]) / (cn * u[j].powf(pw));
    }
    if let Some([c1, c2]) = &g.curvature_correction {
        let zeta = g.cutoff(Cutoff::Zeta);
        for i in 0..s.len() {
            s[i] += zeta[i] * c1[i] + (1.0 - zeta[i]) * c2[i];
        }
    }
    if let Some(d) = &g.deform {
        for (x, y) in s.iter_mut().zip(d.curvature()) {
            *x += y;
        }
    }
    Ok(GridField {
        values: s,
        geometry_id: g.id(),
    })
}

pub fn laplacian_apply(g: &GluedGeometry, f: &GridField) -> Result<GridField> {
    f.check(g)?;
    Ok(GridField {
        values: g.laplacian().apply(&f.values),
        geometry_id: g.id(),
    })
}

/// The neck operator with the printed drift `(n-2) tanh((n-2)t/2)`, for
/// comparison with the conservative stencil. Lumps and end nodes get 0.
pub fn printed_drift_laplacian(g: &GluedGeometry, f: &[f64]) -> Vec<f64> {
    let n = g.n() as f64;
    let h = g.neck.h_t;
    let mut out = vec![0.0; g.len()];
    for i in 2..g.len() - 2 {
        let t = g.neck.t_nodes[i - 1];
        let u = g.u_eps[i - 1];
        let fpp = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
        let fp = (f[i + 1] - f[i - 1]) / (2.0 * h);
        let drift = (n - 2.0) * ((n - 2.0) * t / 2.0).tanh();
        out[i] = u.powf(-4.0 / (n - 2.0)) * (fpp + drift * fp);
    }
    out
}

/// Largest gap between the conservative drift `2u'/u` and the printed drift
/// on neck nodes with `|t| <= |t_max|`.
pub fn drift_discrepancy(g: &GluedGeometry, t_max: f64) -> f64 {
    let n = g.n() as f64;
    let p = &g.profile;
    let d = 1e-6;
    g.neck
        .t_nodes
        .iter()
        .filter(|t| t.abs() <= t_max)
        .map(|&t| {
            let du = (p.eval(t + d) - p.eval(t - d)) / (2.0 * d);
            let conservative = 2.0 * du / p.eval(t);
            let printed = (n - 2.0) * ((n - 2.0) * t / 2.0).tanh();
            (conservative - printed).abs()
        })
        .fold(0.0, f64::max)
}

/// `(1+v)^p - 1 - p v`.
pub fn nonlinear_remainder(v: f64, p: f64) -> f64 {
    (1.0 + v).powf(p) - 1.0 - p * v
}

fn check_domain(v: &[f64]) -> Result<()> {
    let min = v.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    if !(1.0 + min > 0.0) {
        return Err(GluingError::Domain { min: 1.0 + min });
    }
    Ok(())
}

/// `F_ε(v) = c_m (S - S_g) + c_m (S - S_g) v + c_m (4/(m-2)) S v + c_m S f(v)`,
/// evaluated as the equivalent `c_m (S (1+v)^p - S_g (1+v))`.
pub fn f_eps(consts: &ConformalConstants, s_g: &[f64], v: &[f64], s: f64) -> Result<Vec<f64>> {
    check_domain(v)?;
    let p = consts.p_exp;
    Ok(s_g
        .iter()
        .zip(v)
        .map(|(sg, vi)| consts.c_m * (s * (1.0 + vi).powf(p) - sg * (1.0 + vi)))
        .collect())
}

/// The deformed right-hand side `-c_m S_ḡ (1+v)`.
pub fn f_eps_deformed(consts: &ConformalConstants, s_g: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_domain(v)?;
    Ok(s_g
        .iter()
        .zip(v)
        .map(|(sg, vi)| -consts.c_m * sg * (1.0 + vi))
        .collect())
}

/// The constant `S` making `∫ F_ε(v) = 0`: `∫ S_g (1+v) / ∫ (1+v)^p`.
pub fn choose_s(
    g: &GluedGeometry,
    consts: &ConformalConstants,
    s_g: &[f64],
    v: &[f64],
) -> Result<f64> {
    check_domain(v)?;
    let p = consts.p_exp;
    let num: f64 = s_g
        .iter()
        .zip(v)
        .zip(&g.vol_weight)
        .map(|((sg, vi), w)| sg * (1.0 + vi) * w)
        .sum();
    let den: f64 = v
        .iter()
        .zip(&g.vol_weight)
        .map(|(vi, w)| (1.0 + vi).powf(p) * w)
        .sum();
    if !(den.abs() > 0.0) || !den.is_finite() {
        return Err(GluingError::Degenerate(format!(
            "denominator {den} in choose_s"
        )));
    }
    Ok(num / den)
}

/// Integral of the curvature over the neck nodes only, split per side at
/// `t = 0`.
pub fn neck_curvature_mass(g: &GluedGeometry, s: &[f64]) -> (f64, f64) {
    let mut left = 0.0;
    let mut right = 0.0;
    for i in 0..g.len() {
        if g.chart(i) != Chart::Neck {
            continue;
        }
        let t = g.t(i).unwrap_or(0.0);
        let w = s[i] * g.vol_weight[i];
        if t < 0.0 {
            left += w;
        } else if t > 0.0 {
            right += w;
        } else {
            left += 0.5 * w;
            right += 0.5 * w;
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_glued_geometry, GridParams, ModelCap};

    fn geom(n: usize, eps: f64) -> GluedGeometry {
        let c1 = ModelCap::new(n, 1.0, Side::One).unwrap();
        let c2 = ModelCap::new(n, 1.0, Side::Two).unwrap();
        build_glued_geometry(&c1, &c2, eps, 1.0, 1.0, 1.0, &GridParams::default()).unwrap()
    }

    #[test]
    fn constants() {
        let c = ConformalConstants::new(3, 3);
        assert!((c.c_m + 0.125).abs() < 1e-15);
        assert_eq!(c.p_exp, 5.0);
        assert_eq!(c.neck_exp, 4.0);
    }

    #[test]
    fn pure_branch_is_flat() {
        let ts: Vec<f64> = (0..50).map(|i| -2.0 + 0.08 * i as f64).collect();
        let s = neck_scalar_curvature(4, &ts, 0.01, |t| (-t).exp());
        // S u^{4/(n-2)} = c_n^{-1} (k h)^2 / 12 to leading order.
        for (x, t) in s.iter().zip(&ts) {
            assert!((x * (-2.0 * t).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn curvature_lives_in_eta_bands() {
        let g = geom(3, 2f64.powi(-6));
        let s = scalar_curvature(&g).unwrap();
        let l = -g.eps().ln();
        for i in 1..g.len() - 1 {
            let t = g.t(i).unwrap();
            if t.abs() < l - 1.0 - 2.0 * g.neck.h_t {
                assert!(s.values[i].abs() < 1e-3, "t = {t}: {}", s.values[i]);
            }
        }
        let total = integrate_values(&g, &s.values);
        assert!(total < 0.0);
    }

    #[test]
    fn coarse_grid_fails_resolution() {
        let c1 = ModelCap::new(3, 1.0, Side::One).unwrap();
        let c2 = ModelCap::new(3, 1.0, Side::Two).unwrap();
        let grid = GridParams {
            h_t: Some(0.04),
            collar_nodes: 0,
        };
        let g = build_glued_geometry(&c1, &c2, 0.05, 1.0, 1.0, 1.0, &grid).unwrap();
        assert!(matches!(
            scalar_curvature(&g),
            Err(GluingError::Resolution(_))
        ));
    }

    #[test]
    fn f_eps_at_zero() {
        let c = ConformalConstants::new(3, 3);
        let sg = [1.0, -2.0, 0.5];
        let v = [0.0; 3];
        let f = f_eps(&c, &sg, &v, 0.0).unwrap();
        for (a, b) in f.iter().zip(sg) {
            assert!((a + c.c_m * b).abs() < 1e-15);
        }
        let f = f_eps(&c, &[0.0; 3], &v, 2.0).unwrap();
        assert!(f.iter().all(|x| (x - 2.0 * c.c_m).abs() < 1e-15));
    }

    #[test]
    fn f_eps_matches_expanded_form() {
        let c = ConformalConstants::new(4, 4);
        let (sg, v, s) = (0.7, 0.13, -0.4);
        let expanded = c.c_m * (s - sg)
            + c.c_m * (s - sg) * v
            + c.c_m * 4.0 / 2.0 * s * v
            + c.c_m * s * nonlinear_remainder(v, c.p_exp);
        let f = f_eps(&c, &[sg], &[v], s).unwrap()[0];
        assert!((f - expanded).abs() < 1e-14);
    }

    #[test]
    fn remainder_is_quadratic() {
        assert_eq!(nonlinear_remainder(0.0, 5.0), 0.0);
        let d = 1e-5;
        let slope = (nonlinear_remainder(d, 5.0) - nonlinear_remainder(-d, 5.0)) / (2.0 * d);
        assert!(slope.abs() < 1e-8);
    }

    #[test]
    fn domain_violation() {
        let c = ConformalConstants::new(3, 3);
        assert!(matches!(
            f_eps(&c, &[0.0], &[-1.5], 0.0),
            Err(GluingError::Domain { .. })
        ));
    }

    #[test]
    fn choose_s_at_zero_is_average() {
        let g = geom(3, 0.05);
        let c = ConformalConstants::new(3, 3);
        let sg = scalar_curvature(&g).unwrap().values;
        let s = choose_s(&g, &c, &sg, &vec![0.0; g.len()]).unwrap();
        let avg = integrate_values(&g, &sg) / g.total_volume();
        assert!((s - avg).abs() < 1e-14 * avg.abs());
    }

    #[test]
    fn pairing_support_check() {
        let g = geom(3, 0.05);
        let mut k = DeformationProfile::on_lump(&g, Side::One, 1.0, 0.5);
        assert!((pairing_integral(&k, &g).unwrap() - 1.0).abs() < 1e-14);
        k.profile[3] = 0.1;
        assert!(matches!(
            pairing_integral(&k, &g),
            Err(GluingError::Support(_))
        ));
    }

    #[test]
    fn ricci_flat_is_an_assumption_error() {
        let g = geom(3, 0.05);
        let d = Deformation {
            r: 0.0,
            s: 0.0,
            sigma: 1.0,
            k1: DeformationProfile::on_lump(&g, Side::One, 0.0, 0.5),
            k2: DeformationProfile::on_lump(&g, Side::Two, 1.0, 0.5),
        };
        assert!(matches!(
            g.with_deformation(d),
            Err(GluingError::Assumption(_))
        ));
    }

    #[test]
    fn drift_agrees_on_symmetric_plateau() {
        let g = geom(3, 2f64.powi(-6));
        let l = -g.eps().ln();
        assert!(drift_discrepancy(&g, l - 1.0) < 1e-8);
    }
}
