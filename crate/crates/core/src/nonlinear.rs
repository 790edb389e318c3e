//! Fixed-point iteration for the projected Yamabe problem
//! `Δv = F_ε(v) - λ β_ε`.

use serde::{Deserialize, Serialize};

use crate::curvature::{choose_s, f_eps, f_eps_deformed, scalar_curvature, ConformalConstants};
use crate::error::{GluingError, Result};
use crate::fields::{mean_zero_values, GridField};
use crate::geometry::GluedGeometry;
use crate::linsolve::{LinearSolveResult, LinearSolver};

/// Default weight exponent for the nonlinear problem.
pub const DEFAULT_GAMMA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallParams {
    pub gamma: f64,
    pub r_eps: f64,
}

impl BallParams {
    pub fn new(n: usize, eps: f64, gamma: f64, c0: f64) -> Result<Self> {
        Ok(Self {
            gamma,
            r_eps: ball_radius(n, eps, gamma, c0)?,
        })
    }
}

/// `c0 ε` for `n = 3`, `c0 ε^{1+γ}` for `n >= 4`.
pub fn ball_radius(n: usize, eps: f64, gamma: f64, c0: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(GluingError::param(
            "gamma",
            format!("{gamma} not in (0, 1/2)"),
        ));
    }
    if !(c0 > 0.0) {
        return Err(GluingError::param("c0", format!("{c0} is not positive")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(GluingError::param("eps", format!("{eps} not in (0, 1)")));
    }
    Ok(if n == 3 {
        c0 * eps
    } else {
        c0 * eps.powf(1.0 + gamma)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rhs {
    /// `c_m (S (1+v)^p - S_g (1+v))` with `S` chosen so the integral vanishes.
    ConstantS,
    /// `-c_m S_ḡ (1+v)`, projected to mean zero.
    Deformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardStep {
    pub u: Vec<f64>,
    pub s: f64,
    pub lambda: f64,
    pub linear: LinearSolveResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardState {
    pub v: GridField,
    #[serde(rename = "S")]
    pub s: f64,
    pub lambda: f64,
    pub iteration: usize,
    pub step_norms: Vec<f64>,
    /// `‖Δv - F(v) + λβ‖_{γ+2}` at the final iterate.
    pub residual: f64,
    pub s_history: Vec<f64>,
    pub lambda_history: Vec<f64>,
    /// `‖Δv^{j+1} - F(v^{j+1}) + λ^{(j)} β‖_{γ+2}` per iteration.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct YamabeSolver<'a> {
    pub linear: LinearSolver<'a>,
    pub consts: ConformalConstants,
    pub s_g: Vec<f64>,
    pub rhs: Rhs,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl<'a> YamabeSolver<'a> {
    pub fn new(g: &'a GluedGeometry, gamma: f64) -> Result<Self> {
        let s_g = scalar_curvature(g)?.values;
        Self::with_curvature(g, gamma, s_g)
    }

    /// Uses a prescribed background curvature instead of `S_{g_ε}`.
    pub fn with_curvature(g: &'a GluedGeometry, gamma: f64, s_g: Vec<f64>) -> Result<Self> {
        if s_g.len() != g.len() {
            return Err(GluingError::DimensionMismatch(format!(
                "curvature of length {} for {} nodes",
                s_g.len(),
                g.len()
            )));
        }
        let rhs = if g.deform.is_some() {
            Rhs::Deformed
        } else {
            Rhs::ConstantS
        };
        Ok(Self {
            linear: LinearSolver::new(g, gamma)?,
            consts: ConformalConstants::new(g.m(), g.n()),
            s_g,
            rhs,
            linear_tol: 1e-12,
            linear_max_iter: 200,
        })
    }

    pub fn geometry(&self) -> &'a GluedGeometry {
        self.linear.geometry()
    }

    pub fn gamma(&self) -> f64 {
        self.linear.gamma
    }

    /// `(S, F(v))`.
    pub fn rhs(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let g = self.geometry();
        match self.rhs {
            Rhs::ConstantS => {
                let s = choose_s(g, &self.consts, &self.s_g, v)?;
                Ok((s, f_eps(&self.consts, &self.s_g, v, s)?))
            }
            Rhs::Deformed => {
                let f = f_eps_deformed(&self.consts, &self.s_g, v)?;
                Ok((0.0, mean_zero_values(g, &f)))
            }
        }
    }

    /// `v ↦ Δ^{-1} F(v)`, with the `λ` of the projected solve.
    pub fn picard_step(&self, v: &[f64]) -> Result<PicardStep> {
        let (s, f) = self.rhs(v)?;
        let linear = self
            .linear
            .iterate_linear_solve(&f, self.linear_tol, self.linear_max_iter)?;
        Ok(PicardStep {
            u: linear.u.values.clone(),
            s,
            lambda: linear.lambda,
            linear,
        })
    }

    /// `‖Δv - F(v) + λβ‖_{γ+2}`.
    pub fn fixed_point_residual(&self, v: &[f64], lambda: f64) -> Result<f64> {
        let (_, f) = self.rhs(v)?;
        Ok(self.linear.residual(v, &f, lambda))
    }

    /// Picard iteration from `v = 0` until the step norm drops below `tol`.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<PicardState> {
        let g = self.geometry();
        let mut v = vec![0.0; g.len()];
        let mut steps = Vec::new();
        let mut s_hist = Vec::new();
        let mut l_hist = Vec::new();
        let mut r_hist = Vec::new();
        for j in 0..max_iter {
            let step = self.picard_step(&v)?;
            let diff: Vec<f64> = step.u.iter().zip(&v).map(|(a, b)| a - b).collect();
            let norm = self.linear.norm(&diff);
            steps.push(norm);
            s_hist.push(step.s);
            l_hist.push(step.lambda);
            v = step.u;
            r_hist.push(self.fixed_point_residual(&v, step.lambda)?);
            if steps.len() >= 2 {
                let ratio = steps[steps.len() - 1] / steps[steps.len() - 2];
                if steps.len() == 2 && !(ratio < 1.0) && norm > tol {
                    return Err(GluingError::NoContraction { ratio });
                }
            }
            if norm <= tol {
                // The last step was taken from the previous iterate; recompute
                // S and λ at the returned one.
                let last = self.picard_step(&v)?;
                let residual = self.fixed_point_residual(&v, last.lambda)?;
                return Ok(PicardState {
                    v: GridField {
                        values: v,
                        geometry_id: g.id(),
                    },
                    s: last.s,
                    lambda: last.lambda,
                    iteration: j + 1,
                    step_norms: steps,
                    residual,
                    s_history: s_hist,
                    lambda_history: l_hist,
                    residual_history: r_hist,
                });
            }
        }
        Err(GluingError::NotConverged {
            iterations: max_iter,
            last: steps.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Convenience wrapper: solve on `g` with the given ball parameters.
pub fn solve_yamabe(
    g: &GluedGeometry,
    params: &BallParams,
    tol: f64,
    max_iter: usize,
) -> Result<PicardState> {
    YamabeSolver::new(g, params.gamma)?.solve(tol, max_iter)
}
