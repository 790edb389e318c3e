//! Killing the approximate eigenvalue: by homotheties of the two summands
//! (`g_1 ↦ R g_1`, `g_2 ↦ Q g_2`) or by deforming the metric off the neck
//! along directions with nonzero Ricci pairing.

use serde::{Deserialize, Serialize};

use crate::curvature::{scalar_curvature, ConformalConstants, Deformation, DeformationProfile};
use crate::error::{GluingError, Result};
use crate::fields::{integrate_values, GridField};
use crate::geometry::{
    build_glued_geometry, default_alpha, Cutoff, GluedGeometry, GridParams, ModelCap, Side,
};
use crate::nonlinear::{PicardState, Rhs, YamabeSolver, DEFAULT_GAMMA};

/// Dimensions and lump volumes of the two summands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapPair {
    pub m: usize,
    pub n: usize,
    pub lump_volume_1: f64,
    pub lump_volume_2: f64,
}

impl CapPair {
    pub fn new(m: usize, lump_volume_1: f64, lump_volume_2: f64) -> Self {
        Self {
            m,
            n: m,
            lump_volume_1,
            lump_volume_2,
        }
    }

    pub fn build(&self, eps: f64, params: &SolveParams, r: f64, q: f64) -> Result<GluedGeometry> {
        let c1 = ModelCap::with_codim(self.m, self.n, self.lump_volume_1, Side::One)?;
        let c2 = ModelCap::with_codim(self.m, self.n, self.lump_volume_2, Side::Two)?;
        let alpha = params.alpha.unwrap_or_else(|| default_alpha(self.n, eps));
        build_glued_geometry(&c1, &c2, eps, alpha, r, q, &params.grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub gamma: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// `None` uses `|log ε| / (2(n-2))`.
    pub alpha: Option<f64>,
    pub grid: GridParams,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            picard_tol: 1e-14,
            picard_max_iter: 25,
            linear_tol: 1e-12,
            linear_max_iter: 200,
            alpha: None,
            grid: GridParams::default(),
        }
    }
}

impl SolveParams {
    fn solver<'a>(&self, g: &'a GluedGeometry) -> Result<YamabeSolver<'a>> {
        let mut y = YamabeSolver::new(g, self.gamma)?;
        y.linear_tol = self.linear_tol;
        y.linear_max_iter = self.linear_max_iter;
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueProbe {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub lambda: f64,
    /// `c_m [∫(S - S_g) χ_1 - ∫(S - S_g) χ_2] / ∫(c_1 χ_1 + c_2 χ_2)`.
    pub lambda_hat: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub converged: bool,
    /// `‖F_ε(v_ε)‖_{γ+2}`.
    pub norm_f: f64,
    pub picard_iterations: usize,
}

/// Leading-order surrogate of `λ`, with the `c_m` of `F_ε` kept so that it
/// is directly comparable to `λ`.
pub fn lambda_surrogate(y: &YamabeSolver, s: f64) -> f64 {
    let g = y.geometry();
    let chi1 = g.cutoff(Cutoff::Chi1);
    let chi2 = g.cutoff(Cutoff::Chi2);
    let b = &y.linear.basis;
    let num: f64 = (0..g.len())
        .map(|i| (s - y.s_g[i]) * (chi1[i] - chi2[i]) * g.vol_weight[i])
        .sum();
    let den: f64 = (0..g.len())
        .map(|i| (b.c1 * chi1[i] + b.c2 * chi2[i]) * g.vol_weight[i])
        .sum();
    y.consts.c_m * num / den
}

pub fn lambda_of_scaling(
    r: f64,
    q: f64,
    eps: f64,
    caps: &CapPair,
    params: &SolveParams,
) -> Result<EigenvalueProbe> {
    let g = caps.build(eps, params, r, q)?;
    let y = params.solver(&g)?;
    let st = y.solve(params.picard_tol, params.picard_max_iter)?;
    let (_, f) = y.rhs(&st.v.values)?;
    Ok(EigenvalueProbe {
        r,
        q,
        lambda: st.lambda,
        lambda_hat: lambda_surrogate(&y, st.s),
        s: st.s,
        converged: true,
        norm_f: y.linear.source_norm(&f),
        picard_iterations: st.iteration,
    })
}

/// `∫ ũ Δχ dvol + ∫ g(∇χ, ∇ũ) dvol`, which vanishes by summation by parts.
pub fn green_boundary_terms(g: &GluedGeometry, u: &[f64], chi: &[f64]) -> f64 {
    let lap = g.laplacian();
    let d = lap.apply(chi);
    let a: f64 = u
        .iter()
        .zip(&d)
        .zip(&g.vol_weight)
        .map(|((x, y), w)| x * y * w)
        .sum();
    a + lap.dirichlet_form(chi, u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
    pub lambda: f64,
    pub lambda_11: f64,
    pub tolerance: f64,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    /// Probes at `(R_max, 1)` and `(1, R_max)`.
    pub endpoints: [EigenvalueProbe; 2],
    pub probes: Vec<EigenvalueProbe>,
}

/// Point at parameter `s ∈ [0, 1]` on the path from `(R_max, 1)` to
/// `(1, R_max)`.
pub fn balance_path(r_max: f64, s: f64) -> (f64, f64) {
    (r_max.powf(1.0 - s), r_max.powf(s))
}

/// Largest `R_max` tried by the doubling search.
pub const R_MAX_CAP: f64 = 1024.0;

pub fn find_balanced_scaling(
    eps: f64,
    caps: &CapPair,
    params: &SolveParams,
    r_max: f64,
) -> Result<BalanceResult> {
    if !(r_max > 1.0) {
        return Err(GluingError::param(
            "R_max",
            format!("{r_max} must exceed 1"),
        ));
    }
    let p11 = lambda_of_scaling(1.0, 1.0, eps, caps, params)?;
    let tol = 1e-10 * p11.lambda.abs() + 1e-14;
    let mut probes = vec![p11.clone()];
    if p11.lambda.abs() <= tol.max(1e-10 * p11.norm_f) {
        return Ok(BalanceResult {
            r0: 1.0,
            q0: 1.0,
            lambda: p11.lambda,
            lambda_11: p11.lambda,
            tolerance: tol,
            r_max,
            endpoints: [p11.clone(), p11.clone()],
            probes,
        });
    }
    let mut rm = r_max;
    let (lo_probe, hi_probe) = loop {
        let a = lambda_of_scaling(rm, 1.0, eps, caps, params)?;
        let b = lambda_of_scaling(1.0, rm, eps, caps, params)?;
        probes.push(a.clone());
        probes.push(b.clone());
        if a.lambda * b.lambda < 0.0 {
            break (a, b);
        }
        if rm * 2.0 > R_MAX_CAP {
            return Err(GluingError::SignSearch(format!(
                "no sign change up to R_max = {rm}: lambda(R_max,1) = {:e}, lambda(1,R_max) = {:e}",
                a.lambda, b.lambda
            )));
        }
        rm *= 2.0;
    };
    let endpoints = [lo_probe.clone(), hi_probe.clone()];
    let (mut s_lo, mut s_hi) = (0.0f64, 1.0f64);
    let mut l_lo = lo_probe.lambda;
    let mut best = if lo_probe.lambda.abs() < hi_probe.lambda.abs() {
        lo_probe
    } else {
        hi_probe
    };
    for _ in 0..200 {
        let s = 0.5 * (s_lo + s_hi);
        let (r, q) = balance_path(rm, s);
        let p = lambda_of_scaling(r, q, eps, caps, params)?;
        probes.push(p.clone());
        if p.lambda.abs() < best.lambda.abs() {
            best = p.clone();
        }
        if p.lambda.abs() <= tol {
            break;
        }
        if (p.lambda < 0.0) == (l_lo < 0.0) {
            s_lo = s;
            l_lo = p.lambda;
        } else {
            s_hi = s;
        }
        if s_hi - s_lo <= f64::EPSILON {
            break;
        }
    }
    Ok(BalanceResult {
        r0: best.r,
        q0: best.q,
        lambda: best.lambda,
        lambda_11: p11.lambda,
        tolerance: tol,
        r_max: rm,
        endpoints,
        probes,
    })
}

/// Parameters of the deformation procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformParams {
    /// Pairing integrals `∫ K_i`; must be 1 (0 means Ricci-flat).
    pub pairing_1: f64,
    pub pairing_2: f64,
    pub quad_coeff: f64,
    /// Half-width of the band `Z_ε` in units of `ε^{n-2}`.
    pub band: f64,
    pub scan_samples: usize,
    pub g_tol: f64,
}

impl Default for DeformParams {
    fn default() -> Self {
        Self {
            pairing_1: 1.0,
            pairing_2: 1.0,
            quad_coeff: 0.5,
            band: 0.1,
            scan_samples: 8,
            g_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformState {
    pub r: f64,
    pub s: f64,
    #[serde(rename = "G")]
    pub g_value: f64,
    #[serde(rename = "H")]
    pub h_value: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    pub v: GridField,
    pub lambda: f64,
    pub picard_iterations: usize,
}

/// The split `G = H + E_1 + E_2` in reported units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSplit {
    pub g: f64,
    pub h: f64,
    pub e1: f64,
    pub e2: f64,
}

/// One deformation experiment on a fixed base geometry.
#[derive(Debug, Clone)]
pub struct DeformProblem<'a> {
    pub base: &'a GluedGeometry,
    pub params: DeformParams,
    pub solve: SolveParams,
    /// `-∫ S_{g_ε} / ε^{n-2}`, the factor between reported and model units.
    pub sigma: f64,
    pub k1: DeformationProfile,
    pub k2: DeformationProfile,
    s_g: Vec<f64>,
    consts: ConformalConstants,
}

impl<'a> DeformProblem<'a> {
    pub fn new(base: &'a GluedGeometry, params: DeformParams, solve: SolveParams) -> Result<Self> {
        let s_g = scalar_curvature(base)?.values;
        let en = base.eps().powi(base.n() as i32 - 2);
        let sigma = -integrate_values(base, &s_g) / en;
        let k1 = DeformationProfile::on_lump(base, Side::One, params.pairing_1, params.quad_coeff);
        let k2 = DeformationProfile::on_lump(base, Side::Two, params.pairing_2, params.quad_coeff);
        // Validates pairings (Ricci-flat → assumption error) and support.
        Deformation {
            r: 0.0,
            s: 0.0,
            sigma,
            k1: k1.clone(),
            k2: k2.clone(),
        }
        .validate(base)?;
        Ok(Self {
            base,
            params,
            solve,
            sigma,
            k1,
            k2,
            s_g,
            consts: ConformalConstants::new(base.m(), base.n()),
        })
    }

    pub fn eps_power(&self) -> f64 {
        self.base.eps().powi(self.base.n() as i32 - 2)
    }

    pub fn deformation(&self, r: f64, s: f64) -> Deformation {
        Deformation {
            r,
            s,
            sigma: self.sigma,
            k1: self.k1.clone(),
            k2: self.k2.clone(),
        }
    }

    /// `S_ḡ` for the pair `(r, s)`.
    pub fn curvature(&self, r: f64, s: f64) -> Vec<f64> {
        let d = self.deformation(r, s).curvature();
        self.s_g.iter().zip(d).map(|(a, b)| a + b).collect()
    }

    pub fn g_function(&self, r: f64, s: f64, v: &[f64]) -> GSplit {
        let g = self.base;
        let iv = |f: &[f64], w: &dyn Fn(f64) -> f64| -> f64 {
            (0..g.len()).map(|i| f[i] * w(v[i]) * g.vol_weight[i]).sum()
        };
        let one_plus = |x: f64| 1.0 + x;
        let just = |x: f64| x;
        let q = self.params.quad_coeff;
        let en = self.eps_power();
        let sg_v = iv(&self.s_g, &just) / self.sigma;
        let k1v = iv(&self.k1.profile, &just);
        let k2v = iv(&self.k2.profile, &just);
        let k1_1v = iv(&self.k1.profile, &one_plus);
        let k2_1v = iv(&self.k2.profile, &one_plus);
        let sg_1 = integrate_values(g, &self.s_g) / self.sigma;
        let h = -en + r + s;
        let e1 = sg_v + r * k1v + s * k2v;
        let e2 = q * (r * r * k1_1v + s * s * k2_1v);
        // Computed directly rather than as h + e1 + e2 so that rounding in
        // the normalization shows up.
        let g_value = sg_1 + sg_v + (r + q * r * r) * k1_1v + (s + q * s * s) * k2_1v;
        GSplit {
            g: g_value,
            h,
            e1,
            e2,
        }
    }

    fn picard(&self, r: f64, s: f64) -> Result<PicardState> {
        let mut y =
            YamabeSolver::with_curvature(self.base, self.solve.gamma, self.curvature(r, s))?;
        y.rhs = Rhs::Deformed;
        y.linear_tol = self.solve.linear_tol;
        y.linear_max_iter = self.solve.linear_max_iter;
        y.solve(self.solve.picard_tol, self.solve.picard_max_iter)
    }

    pub fn state(&self, r: f64, s: f64) -> Result<DeformState> {
        let st = self.picard(r, s)?;
        let split = self.g_function(r, s, &st.v.values);
        Ok(DeformState {
            r,
            s,
            g_value: split.g,
            h_value: split.h,
            e1: split.e1,
            e2: split.e2,
            v: st.v,
            lambda: st.lambda,
            picard_iterations: st.iteration,
        })
    }

    /// Secant iteration in `s` on `G(r, s, v(r, s)) = 0`.
    pub fn solve_s(&self, r: f64, s_guess: f64) -> Result<DeformState> {
        let en = self.eps_power();
        let tol = self.params.g_tol * en;
        let mut s0 = s_guess;
        let mut a = self.state(r, s0)?;
        if a.g_value.abs() <= tol {
            return Ok(a);
        }
        let mut s1 = s0 - a.g_value;
        for _ in 0..50 {
            let b = self.state(r, s1)?;
            if b.g_value.abs() <= tol {
                return Ok(b);
            }
            let slope = (b.g_value - a.g_value) / (s1 - s0);
            if !(slope.is_finite() && slope != 0.0) {
                break;
            }
            let s2 = s1 - b.g_value / slope;
            s0 = s1;
            a = b;
            s1 = s2;
        }
        Err(GluingError::NotConverged {
            iterations: 50,
            last: a.g_value,
        })
    }

    /// `s = f(r)` at each sample.
    pub fn implicit_curve(&self, r_samples: &[f64]) -> Result<Vec<DeformState>> {
        let en = self.eps_power();
        let hi = (1.0 - self.params.band) * en;
        let mut out: Vec<DeformState> = Vec::with_capacity(r_samples.len());
        for &r in r_samples {
            if !(r > 0.0 && r < hi) {
                return Err(GluingError::param(
                    "r",
                    format!("{r} outside the scan range (0, {hi})"),
                ));
            }
            let guess = out.last().map_or(en - r, |p| p.s + p.r - r);
            out.push(self.solve_s(r, guess)?);
        }
        Ok(out)
    }

    pub fn scan_points(&self) -> Vec<f64> {
        let en = self.eps_power();
        let hi = (1.0 - self.params.band) * en;
        let k = self.params.scan_samples.max(2);
        (1..=k).map(|j| hi * j as f64 / (k + 1) as f64).collect()
    }

    pub fn solve(&self) -> Result<DeformOutcome> {
        let curve = self.implicit_curve(&self.scan_points())?;
        let scale = curve.iter().fold(0.0f64, |m, p| m.max(p.lambda.abs()));
        let tol = 1e-10 * scale;
        let Some(k) = (0..curve.len() - 1).find(|&k| curve[k].lambda * curve[k + 1].lambda <= 0.0)
        else {
            return Err(GluingError::Assumption(format!(
                "lambda does not change sign along the scanned curve (first {:e}, last {:e})",
                curve[0].lambda,
                curve[curve.len() - 1].lambda
            )));
        };
        let mut lo = curve[k].clone();
        let mut hi = curve[k + 1].clone();
        let mut best = if lo.lambda.abs() <= hi.lambda.abs() {
            lo.clone()
        } else {
            hi.clone()
        };
        let mut bisections = 0;
        while best.lambda.abs() > tol && hi.r - lo.r > f64::EPSILON * hi.r {
            let r = 0.5 * (lo.r + hi.r);
            let guess = 0.5 * (lo.s + hi.s);
            let mid = self.solve_s(r, guess)?;
            bisections += 1;
            if mid.lambda.abs() < best.lambda.abs() {
                best = mid.clone();
            }
            if (mid.lambda < 0.0) == (lo.lambda < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let final_check = self.final_check(&best)?;
        Ok(DeformOutcome {
            root: best,
            curve,
            lambda_scale: scale,
            lambda_tolerance: tol,
            bisections,
            final_check,
        })
    }

    /// Scalar curvature of `(1+v)^{4/(m-2)} ḡ` and its integral.
    pub fn final_check(&self, st: &DeformState) -> Result<FinalCheck> {
        let g = self.base;
        let s_bar = self.curvature(st.r, st.s);
        let u: Vec<f64> = st.v.values.iter().map(|x| 1.0 + x).collect();
        let lap = g.laplacian().apply(&u);
        let c = self.consts.c_m;
        let p = self.consts.p_exp;
        let vol_exp = 2.0 * g.m() as f64 / (g.m() as f64 - 2.0);
        let s_tilde: Vec<f64> = (0..g.len())
            .map(|i| (lap[i] + c * s_bar[i] * u[i]) / (c * u[i].powf(p)))
            .collect();
        let integral: f64 = (0..g.len())
            .map(|i| s_tilde[i] * u[i].powf(vol_exp) * g.vol_weight[i])
            .sum();
        let volume: f64 = (0..g.len())
            .map(|i| u[i].powf(vol_exp) * g.vol_weight[i])
            .sum();
        let sup = s_tilde.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(FinalCheck {
            integral,
            volume,
            sup_abs: sup,
            s_tilde,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalCheck {
    /// `∫ S̃ dvol_{g̃}`.
    pub integral: f64,
    pub volume: f64,
    pub sup_abs: f64,
    pub s_tilde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformOutcome {
    pub root: DeformState,
    pub curve: Vec<DeformState>,
    pub lambda_scale: f64,
    pub lambda_tolerance: f64,
    pub bisections: usize,
    pub final_check: FinalCheck,
}

pub fn solve_deformation(
    eps: f64,
    caps: &CapPair,
    params: DeformParams,
    solve: SolveParams,
) -> Result<DeformOutcome> {
    let g = caps.build(eps, &solve, 1.0, 1.0)?;
    DeformProblem::new(&g, params, solve)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_endpoints() {
        assert_eq!(balance_path(16.0, 0.0), (16.0, 1.0));
        assert_eq!(balance_path(16.0, 1.0), (1.0, 16.0));
        let (r, q) = balance_path(16.0, 0.5);
        assert!((r - 4.0).abs() < 1e-12 && (q - 4.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_caps_balance_at_once() {
        let caps = CapPair::new(3, 1.0, 1.0);
        let res =
            find_balanced_scaling(2f64.powi(-5), &caps, &SolveParams::default(), 16.0).unwrap();
        assert_eq!((res.r0, res.q0), (1.0, 1.0));
    }

    #[test]
    fn h_is_exact_at_zero_v() {
        let caps = CapPair::new(3, 1.0, 1.0);
        let sp = SolveParams::default();
        let g = caps.build(2f64.powi(-5), &sp, 1.0, 1.0).unwrap();
        let dp = DeformProblem::new(
            &g,
            DeformParams {
                quad_coeff: 0.0,
                ..Default::default()
            },
            sp,
        )
        .unwrap();
        let v = vec![0.0; g.len()];
        let split = dp.g_function(0.01, 0.02, &v);
        assert!((split.g - split.h).abs() < 1e-13);
        assert_eq!(split.e1, 0.0);
    }

    #[test]
    fn ricci_flat_refused() {
        let caps = CapPair::new(3, 1.0, 1.0);
        let params = DeformParams {
            pairing_1: 0.0,
            pairing_2: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            solve_deformation(2f64.powi(-5), &caps, params, SolveParams::default()),
            Err(GluingError::Assumption(_))
        ));
    }
}
