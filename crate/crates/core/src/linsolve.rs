//! Linear theory: projection onto the complement of the approximate first
//! eigenfunction, the approximate inverse built from a Dirichlet neck solve
//! and two cap solves, and the Neumann series that turns it into an exact
//! inverse.

use serde::{Deserialize, Serialize};

use crate::error::{GluingError, Result};
use crate::fields::{integrate_values, mean_zero_values, weight, GridField, WeightProfile};
use crate::geometry::{Cutoff, GluedGeometry, Side};

/// Relative tolerance on `∫ f = 0` for sources.
const MEAN_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBasis {
    /// `c_1 χ_1 - c_2 χ_2`.
    pub beta: GridField,
    pub c1: f64,
    pub c2: f64,
}

pub fn make_projection_basis(g: &GluedGeometry) -> Result<ProjectionBasis> {
    let chi1 = g.cutoff(Cutoff::Chi1);
    let chi2 = g.cutoff(Cutoff::Chi2);
    let i1 = integrate_values(g, &chi1);
    let i2 = integrate_values(g, &chi2);
    if !(i2 > 0.0) {
        return Err(GluingError::Degenerate(format!("integral of chi2 is {i2}")));
    }
    let c1 = 1.0;
    let c2 = c1 * i1 / i2;
    let beta = chi1
        .iter()
        .zip(&chi2)
        .map(|(a, b)| c1 * a - c2 * b)
        .collect();
    Ok(ProjectionBasis {
        beta: GridField {
            values: beta,
            geometry_id: g.id(),
        },
        c1,
        c2,
    })
}

/// Output of a cap solve, on glued indexing. Nodes outside the cap (the
/// other lump) carry 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapSolution {
    pub side: Side,
    /// `ũ = ū + û`.
    pub total: Vec<f64>,
    /// `û`, the Green part.
    pub green: Vec<f64>,
    /// `ū`.
    pub regular: Vec<f64>,
    /// `b = ∫ h` over the cap.
    pub b: f64,
    /// Cap-local node where the pure Green tail starts.
    pub gauge_node: usize,
}

/// Flat radial Green function `C_h ρ^{2-n} / A²` of the discrete cap, with
/// `C_h = h / (2 ω sinh(k h))` (which tends to `1/((n-2) ω)`).
pub fn discrete_green(g: &GluedGeometry, side: Side) -> Vec<f64> {
    let cap = g.cap_operator(side);
    let n = g.n() as f64;
    let h = g.neck.h_t;
    let k = g.neck.decay();
    let c = h / (2.0 * g.sphere_area * (k * h).sinh());
    let a2 = cap.amplitude * cap.amplitude;
    let mut out: Vec<f64> = cap.rho.iter().map(|r| c * r.powf(2.0 - n) / a2).collect();
    // The lump is not on the radial collar.
    out[0] = f64::NAN;
    out
}

/// Solves `Δ_i ũ = h - b δ` on the pure cap `i`, with `δ` a unit point
/// source at `|x| = ε²` and `b = ∫ h`. The additive constant is fixed so
/// that beyond the support of `h` the solution is exactly `b` times the
/// discrete Green function.
pub fn cap_solve_with_green(h: &[f64], side: Side, g: &GluedGeometry) -> Result<CapSolution> {
    if h.len() != g.len() {
        return Err(GluingError::DimensionMismatch(format!(
            "source of length {} for {} nodes",
            h.len(),
            g.len()
        )));
    }
    let other = g.lump_index(side.other());
    if h[other] != 0.0 {
        return Err(GluingError::Support(format!(
            "cap {} source is nonzero on the opposite lump",
            side.index()
        )));
    }
    let cap = g.cap_operator(side);
    let lap = &cap.laplacian;
    let vol = lap.volume();
    let hc = cap.restrict(h);
    let nc = cap.len();
    let Some(last) = hc.iter().rposition(|x| *x != 0.0) else {
        let zero = vec![0.0; g.len()];
        return Ok(CapSolution {
            side,
            total: zero.clone(),
            green: zero.clone(),
            regular: zero,
            b: 0.0,
            gauge_node: 1,
        });
    };
    let gauge = last + 1;
    if gauge >= nc {
        return Err(GluingError::Support(format!(
            "cap {} source reaches the inner end of the collar",
            side.index()
        )));
    }
    let b: f64 = hc.iter().zip(vol).map(|(x, v)| x * v).sum();
    let green = discrete_green(g, side);
    let gauge_value = b * green[gauge];

    let mut src = hc.clone();
    src[nc - 1] -= b / vol[nc - 1];
    let total = lap.solve_compatible(&src, gauge, gauge_value, 1e-10)?;

    let vtot: f64 = vol.iter().sum();
    let mut src_green = vec![b / vtot; nc];
    src_green[nc - 1] -= b / vol[nc - 1];
    let green_part = if b == 0.0 {
        vec![0.0; nc]
    } else {
        lap.solve_compatible(&src_green, gauge, gauge_value, 1e-10)?
    };
    let regular: Vec<f64> = total.iter().zip(&green_part).map(|(a, b)| a - b).collect();
    Ok(CapSolution {
        side,
        total: cap.extend(&total, g.len()),
        green: cap.extend(&green_part, g.len()),
        regular: cap.extend(&regular, g.len()),
        b,
        gauge_node: gauge,
    })
}

/// Intermediate fields of one approximate solve, on glued indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxParts {
    pub u_p: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub cap1: CapSolution,
    pub cap2: CapSolution,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxDiagnostics {
    pub norm_f: f64,
    pub norm_u: f64,
    pub norm_r_err: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSolveResult {
    pub u: GridField,
    pub lambda: f64,
    pub r_err: GridField,
    pub diagnostics: ApproxDiagnostics,
    pub parts: ApproxParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveResult {
    pub u: GridField,
    pub lambda: f64,
    pub iterations: usize,
    /// `‖r_err^{(j)}‖_{γ+2}` for each pass.
    pub residual_history: Vec<f64>,
    /// `‖r_err^{(0)}‖_{γ+2} / ‖f‖_{γ+2}`.
    pub first_ratio: f64,
    /// `‖Δu - f + λβ‖_{γ+2}` recomputed from the summed solution.
    pub final_residual: f64,
}

/// Everything the linear solves need that depends only on the geometry.
#[derive(Debug, Clone)]
pub struct LinearSolver<'a> {
    g: &'a GluedGeometry,
    pub basis: ProjectionBasis,
    pub weight: WeightProfile,
    pub gamma: f64,
    chi1: Vec<f64>,
    chi2: Vec<f64>,
    chi_p: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    /// Glued indices of `∂T^ε_α`.
    lo: usize,
    hi: usize,
}

impl<'a> LinearSolver<'a> {
    pub fn new(g: &'a GluedGeometry, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < g.n() as f64 - 2.0) {
            return Err(GluingError::param(
                "gamma",
                format!("{gamma} not in (0, n - 2 = {})", g.n() - 2),
            ));
        }
        let l = g.neck.half_length();
        let lo = g.neck.first_at_or_after(-l + g.alpha()) + 1;
        let hi = g.len() - 1 - lo;
        if hi < lo + 2 {
            return Err(GluingError::Resolution(
                "the truncated neck has no interior nodes".into(),
            ));
        }
        Ok(Self {
            g,
            basis: make_projection_basis(g)?,
            weight: weight(g),
            gamma,
            chi1: g.cutoff(Cutoff::Chi1),
            chi2: g.cutoff(Cutoff::Chi2),
            chi_p: g.cutoff(Cutoff::ChiP),
            phi1: g.cutoff(Cutoff::Phi1),
            phi2: g.cutoff(Cutoff::Phi2),
            lo,
            hi,
        })
    }

    pub fn geometry(&self) -> &'a GluedGeometry {
        self.g
    }

    /// Glued indices `(lo, hi)` of the two boundary nodes of `T^ε_α`.
    pub fn dirichlet_window(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    /// `‖·‖_γ`.
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.weight.norm(f, self.gamma)
    }

    /// `‖·‖_{γ+2}`.
    pub fn source_norm(&self, f: &[f64]) -> f64 {
        self.weight.norm(f, self.gamma + 2.0)
    }

    fn lap(&self, f: &[f64]) -> Vec<f64> {
        self.g.laplacian().apply(f)
    }

    /// `Δv = f_P` on `T^ε_α` with `v = 0` on its boundary, extended by 0.
    pub fn dirichlet_neck_solve(&self, f_p: &[f64]) -> Result<Vec<f64>> {
        self.g.laplacian().solve_dirichlet(f_p, self.lo, self.hi)
    }

    fn check_mean_zero(&self, f: &[f64]) -> Result<()> {
        let total = integrate_values(self.g, f);
        let scale: f64 = f
            .iter()
            .zip(&self.g.vol_weight)
            .map(|(x, v)| (x * v).abs())
            .sum();
        if total.abs() > MEAN_ZERO_TOL * scale {
            return Err(GluingError::Precondition(format!(
                "source has integral {total:e} (scale {scale:e})"
            )));
        }
        Ok(())
    }

    pub fn approximate_solve(&self, f: &[f64]) -> Result<ApproxSolveResult> {
        let g = self.g;
        let len = g.len();
        if f.len() != len {
            return Err(GluingError::DimensionMismatch(format!(
                "source of length {} for {len} nodes",
                f.len()
            )));
        }
        self.check_mean_zero(f)?;
        let mul =
            |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };

        let f1 = mul(&self.chi1, f);
        let f2 = mul(&self.chi2, f);
        let f_p = mul(&self.chi_p, f);
        let u_p = self.dirichlet_neck_solve(&f_p)?;
        // Δũ_P - f_P lives on ∂T^ε_α; each side takes its own half so that
        // f_P = Δ(χ_P ũ_P) + q_1 + q_2 holds exactly.
        let defect: Vec<f64> = self
            .lap(&u_p)
            .iter()
            .zip(&f_p)
            .map(|(a, b)| a - b)
            .collect();
        let mid = len / 2;
        let mut q1 = self.lap(&mul(&self.chi1, &u_p));
        let mut q2 = self.lap(&mul(&self.chi2, &u_p));
        for i in 0..len {
            if i < mid {
                q1[i] -= defect[i];
            } else {
                q2[i] -= defect[i];
            }
        }
        let ft1: Vec<f64> = f1.iter().zip(&q1).map(|(a, b)| a + b).collect();
        let ft2: Vec<f64> = f2.iter().zip(&q2).map(|(a, b)| a + b).collect();

        let c1 = self.basis.c1;
        let c2 = self.basis.c2;
        let den: f64 = integrate_values(
            g,
            &self
                .chi1
                .iter()
                .zip(&self.chi2)
                .map(|(a, b)| c1 * a + c2 * b)
                .collect::<Vec<_>>(),
        );
        let lambda = (integrate_values(g, &ft1) - integrate_values(g, &ft2)) / den;
        let h1: Vec<f64> = ft1
            .iter()
            .zip(&self.chi1)
            .map(|(a, x)| a - lambda * c1 * x)
            .collect();
        let h2: Vec<f64> = ft2
            .iter()
            .zip(&self.chi2)
            .map(|(a, x)| a + lambda * c2 * x)
            .collect();

        let cap1 = cap_solve_with_green(&h1, Side::One, g)?;
        let cap2 = cap_solve_with_green(&h2, Side::Two, g)?;
        let w1 = mul(&self.phi1, &cap1.total);
        let w2 = mul(&self.phi2, &cap2.total);
        let e1: Vec<f64> = self.lap(&w1).iter().zip(&h1).map(|(a, b)| a - b).collect();
        let e2: Vec<f64> = self.lap(&w2).iter().zip(&h2).map(|(a, b)| a - b).collect();

        let raw: Vec<f64> = (0..len)
            .map(|i| self.chi_p[i] * u_p[i] + w1[i] + w2[i])
            .collect();
        let u = mean_zero_values(g, &raw);
        let beta = &self.basis.beta.values;
        let r_err: Vec<f64> = self
            .lap(&u)
            .iter()
            .zip(f)
            .zip(beta)
            .map(|((du, fi), b)| du - fi + lambda * b)
            .collect();

        let diagnostics = ApproxDiagnostics {
            norm_f: self.source_norm(f),
            norm_u: self.norm(&u),
            norm_r_err: self.source_norm(&r_err),
            lambda,
        };
        Ok(ApproxSolveResult {
            u: GridField {
                values: u,
                geometry_id: g.id(),
            },
            lambda,
            r_err: GridField {
                values: r_err,
                geometry_id: g.id(),
            },
            diagnostics,
            parts: ApproxParts {
                u_p,
                q1,
                q2,
                h1,
                h2,
                cap1,
                cap2,
                e1,
                e2,
            },
        })
    }

    /// Neumann series `f^{(0)} = f`, `f^{(j)} = -r_err^{(j-1)}`.
    pub fn iterate_linear_solve(
        &self,
        f: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<LinearSolveResult> {
        let g = self.g;
        let norm_f = self.source_norm(f);
        let mut u = vec![0.0; g.len()];
        let mut lambda = 0.0;
        if norm_f == 0.0 {
            self.check_mean_zero(f)?;
            return Ok(LinearSolveResult {
                u: GridField {
                    values: u,
                    geometry_id: g.id(),
                },
                lambda,
                iterations: 0,
                residual_history: Vec::new(),
                first_ratio: 0.0,
                final_residual: 0.0,
            });
        }
        let mut history = Vec::new();
        let mut first_ratio = f64::NAN;
        let mut source = f.to_vec();
        for j in 0..max_iter {
            let res = self.approximate_solve(&source)?;
            for (a, b) in u.iter_mut().zip(&res.u.values) {
                *a += b;
            }
            lambda += res.lambda;
            let r = res.diagnostics.norm_r_err;
            history.push(r);
            if j == 0 {
                first_ratio = r / norm_f;
                if !(first_ratio < 1.0) {
                    return Err(GluingError::NoContraction { ratio: first_ratio });
                }
            }
            if r <= tol * norm_f {
                let final_residual = self.residual(&u, f, lambda);
                return Ok(LinearSolveResult {
                    u: GridField {
                        values: u,
                        geometry_id: g.id(),
                    },
                    lambda,
                    iterations: j + 1,
                    residual_history: history,
                    first_ratio,
                    final_residual,
                });
            }
            let next: Vec<f64> = res.r_err.values.iter().map(|x| -x).collect();
            source = mean_zero_values(g, &next);
        }
        Err(GluingError::NotConverged {
            iterations: max_iter,
            last: history.last().copied().unwrap_or(f64::NAN) / norm_f,
        })
    }

    /// `‖Δu - f + λβ‖_{γ+2}`.
    pub fn residual(&self, u: &[f64], f: &[f64], lambda: f64) -> f64 {
        let r: Vec<f64> = self
            .lap(u)
            .iter()
            .zip(f)
            .zip(&self.basis.beta.values)
            .map(|((du, fi), b)| du - fi + lambda * b)
            .collect();
        self.source_norm(&r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_glued_geometry, default_alpha, GridParams, ModelCap};

    fn geom(v1: f64, v2: f64, eps: f64) -> GluedGeometry {
        let c1 = ModelCap::new(3, v1, Side::One).unwrap();
        let c2 = ModelCap::new(3, v2, Side::Two).unwrap();
        build_glued_geometry(
            &c1,
            &c2,
            eps,
            default_alpha(3, eps),
            1.0,
            1.0,
            &GridParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn basis_integrates_to_zero() {
        let g = geom(1.0, 2.0, 2f64.powi(-6));
        let b = make_projection_basis(&g).unwrap();
        let vol = g.total_volume();
        assert!(integrate_values(&g, &b.beta.values).abs() < 1e-12 * vol);
        let gs = geom(1.0, 1.0, 2f64.powi(-6));
        let bs = make_projection_basis(&gs).unwrap();
        assert!((bs.c2 - bs.c1).abs() < 1e-12);
    }

    #[test]
    fn cap_solve_of_zero() {
        let g = geom(1.0, 1.0, 2f64.powi(-5));
        let s = cap_solve_with_green(&vec![0.0; g.len()], Side::One, &g).unwrap();
        assert!(s.total.iter().all(|x| *x == 0.0));
        assert_eq!(s.b, 0.0);
    }

    #[test]
    fn cap_solve_tail_is_green() {
        let g = geom(1.0, 1.0, 2f64.powi(-5));
        let mut h = vec![0.0; g.len()];
        h[0] = 1.0 / g.vol_weight[0];
        let s = cap_solve_with_green(&h, Side::One, &g).unwrap();
        assert!((s.b - 1.0).abs() < 1e-12);
        let green = discrete_green(&g, Side::One);
        let cap = g.cap_operator(Side::One);
        for i in 1..cap.len() {
            let gi = cap.glued_index[i];
            assert!((s.total[gi] - green[i]).abs() <= 1e-10 * green[i]);
        }
    }

    #[test]
    fn approximate_solve_identity() {
        let g = geom(1.0, 2.0, 2f64.powi(-6));
        let solver = LinearSolver::new(&g, 0.5).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| g.t(i).map_or(0.3, |t| (1.3 * t).sin() + 0.2 * t))
            .collect();
        let f = mean_zero_values(&g, &f);
        let res = solver.approximate_solve(&f).unwrap();
        let scale = res.r_err.max_abs().max(1e-300);
        for i in 0..g.len() {
            let e = res.parts.e1[i] + res.parts.e2[i];
            assert!((res.r_err.values[i] - e).abs() < 1e-9 * scale.max(1.0));
        }
        for h in [&res.parts.h1, &res.parts.h2] {
            let s: f64 = h
                .iter()
                .zip(&g.vol_weight)
                .map(|(a, v)| (a * v).abs())
                .sum();
            assert!(integrate_values(&g, h).abs() < 1e-11 * s);
        }
        assert!(integrate_values(&g, &res.u.values).abs() < 1e-10);
    }

    #[test]
    fn nonzero_mean_rejected() {
        let g = geom(1.0, 1.0, 2f64.powi(-5));
        let solver = LinearSolver::new(&g, 0.5).unwrap();
        assert!(matches!(
            solver.approximate_solve(&vec![1.0; g.len()]),
            Err(GluingError::Precondition(_))
        ));
    }

    #[test]
    fn neumann_series_converges() {
        let g = geom(1.0, 2.0, 2f64.powi(-6));
        let solver = LinearSolver::new(&g, 0.5).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| g.t(i).map_or(-0.2, |t| (0.7 * t).cos()))
            .collect();
        let f = mean_zero_values(&g, &f);
        let res = solver.iterate_linear_solve(&f, 1e-11, 200).unwrap();
        assert!(res.first_ratio < 1.0);
        assert!(res.final_residual <= 1e-9 * solver.source_norm(&f));
    }
}
