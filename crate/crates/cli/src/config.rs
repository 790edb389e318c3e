//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gluing_core::geometry::MAX_H_T;
use gluing_core::nonlinear::DEFAULT_GAMMA;
use gluing_core::{DeformParams, GridParams, SolveParams};

use crate::error::CliError;

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Build,
    Curvature,
    SolveLinear,
    SolveYamabe,
    Balance,
    Deform,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Build => "build",
            Command::Curvature => "curvature",
            Command::SolveLinear => "solve-linear",
            Command::SolveYamabe => "solve-yamabe",
            Command::Balance => "balance",
            Command::Deform => "deform",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_t: Option<f64>,
    #[serde(default)]
    pub collar_nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h_t: None,
            collar_nodes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Weight exponent of the nonlinear problem.
    pub gamma: f64,
    /// Picard step tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            tol: 1e-14,
            max_iter: 25,
            linear_tol: 1e-12,
            linear_max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearConfig {
    /// Weight exponent; `(n-2)/2` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub sources: usize,
    /// Scale the neck part of each random source by `ψ^{-(γ+2)}`.
    pub weighted: bool,
    /// Run the Neumann iteration after the approximate solve.
    pub iterate: bool,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            sources: 20,
            weighted: false,
            iterate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YamabeConfig {
    /// Ball radius constant: `r_ε = c0 ε` or `c0 ε^{1+γ}`.
    pub c0: f64,
    /// Random pairs on the ball sphere used to estimate the Lipschitz constant.
    pub lipschitz_pairs: usize,
}

impl Default for YamabeConfig {
    fn default() -> Self {
        Self {
            c0: 1.0,
            lipschitz_pairs: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalanceConfig {
    #[serde(rename = "R_max")]
    pub r_max: f64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self { r_max: 16.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeformConfig {
    pub pairing_1: f64,
    pub pairing_2: f64,
    pub quad_coeff: f64,
    pub band: f64,
    pub scan_samples: usize,
}

impl Default for DeformConfig {
    fn default() -> Self {
        let d = DeformParams::default();
        Self {
            pairing_1: d.pairing_1,
            pairing_2: d.pairing_2,
            quad_coeff: d.quad_coeff,
            band: d.band,
            scan_samples: d.scan_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub target: Command,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_t: Vec<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Vec::is_empty")]
    pub r: Vec<f64>,
    #[serde(default, rename = "Q", skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
}

fn default_m() -> usize {
    3
}
fn default_eps() -> f64 {
    1.0 / 64.0
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Codimension; equals `m` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "one", rename = "R")]
    pub r: f64,
    #[serde(default = "one", rename = "Q")]
    pub q: f64,
    #[serde(default = "one")]
    pub lump_volume_1: f64,
    #[serde(default = "two")]
    pub lump_volume_2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub linear: LinearConfig,
    #[serde(default)]
    pub yamabe: YamabeConfig,
    #[serde(default)]
    pub balance: BalanceConfig,
    #[serde(default)]
    pub deform: DeformConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} is not a positive finite number")))
    }
}

fn check_eps(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} not in (0, 1)")))
    }
}

fn check_h(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v <= MAX_H_T {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} not in (0, {MAX_H_T}]")))
    }
}

impl ExperimentConfig {
    /// Defaults for `command`.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            m: default_m(),
            n: None,
            eps: default_eps(),
            alpha: None,
            r: 1.0,
            q: 1.0,
            lump_volume_1: 1.0,
            lump_volume_2: 2.0,
            seed: 0,
            out: None,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            linear: LinearConfig::default(),
            yamabe: YamabeConfig::default(),
            balance: BalanceConfig::default(),
            deform: DeformConfig::default(),
            sweep: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn codim(&self) -> usize {
        self.n.unwrap_or(self.m)
    }

    pub fn linear_gamma(&self) -> f64 {
        self.linear
            .gamma
            .unwrap_or((self.codim() as f64 - 2.0) / 2.0)
    }

    pub fn grid_params(&self) -> GridParams {
        GridParams {
            h_t: self.grid.h_t,
            collar_nodes: self.grid.collar_nodes,
        }
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            gamma: self.solver.gamma,
            picard_tol: self.solver.tol,
            picard_max_iter: self.solver.max_iter,
            linear_tol: self.solver.linear_tol,
            linear_max_iter: self.solver.linear_max_iter,
            alpha: self.alpha,
            grid: self.grid_params(),
        }
    }

    pub fn deform_params(&self) -> DeformParams {
        DeformParams {
            pairing_1: self.deform.pairing_1,
            pairing_2: self.deform.pairing_2,
            quad_coeff: self.deform.quad_coeff,
            band: self.deform.band,
            scan_samples: self.deform.scan_samples,
            ..DeformParams::default()
        }
    }

    /// Range checks; every failure names the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m < 3 {
            return Err(invalid("m", format!("{} < 3", self.m)));
        }
        let n = self.codim();
        if n < 3 || n > self.m {
            return Err(invalid("n", format!("{n} not in [3, m = {}]", self.m)));
        }
        check_eps("eps", self.eps)?;
        if let Some(a) = self.alpha {
            positive("alpha", a)?;
        }
        positive("R", self.r)?;
        positive("Q", self.q)?;
        positive("lump_volume_1", self.lump_volume_1)?;
        positive("lump_volume_2", self.lump_volume_2)?;
        if let Some(h) = self.grid.h_t {
            check_h("grid.h_t", h)?;
        }

        let s = &self.solver;
        if !(s.gamma > 0.0 && s.gamma < 0.5) {
            return Err(invalid(
                "solver.gamma",
                format!("{} not in (0, 1/2)", s.gamma),
            ));
        }
        positive("solver.tol", s.tol)?;
        positive("solver.linear_tol", s.linear_tol)?;
        if s.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be at least 1"));
        }
        if s.linear_max_iter == 0 {
            return Err(invalid("solver.linear_max_iter", "must be at least 1"));
        }

        let lg = self.linear_gamma();
        if !(lg > 0.0 && lg < n as f64 - 2.0) {
            return Err(invalid(
                "linear.gamma",
                format!("{lg} not in (0, n-2 = {})", n - 2),
            ));
        }
        if self.linear.sources == 0 {
            return Err(invalid("linear.sources", "must be at least 1"));
        }
        positive("yamabe.c0", self.yamabe.c0)?;
        if !(self.balance.r_max > 1.0 && self.balance.r_max.is_finite()) {
            return Err(invalid(
                "balance.R_max",
                format!("{} must exceed 1", self.balance.r_max),
            ));
        }

        let d = &self.deform;
        for (k, v) in [
            ("deform.pairing_1", d.pairing_1),
            ("deform.pairing_2", d.pairing_2),
        ] {
            if !v.is_finite() {
                return Err(invalid(k, format!("{v} is not finite")));
            }
        }
        if !d.quad_coeff.is_finite() {
            return Err(invalid("deform.quad_coeff", "not finite"));
        }
        if !(d.band > 0.0 && d.band < 1.0) {
            return Err(invalid("deform.band", format!("{} not in (0, 1)", d.band)));
        }
        if d.scan_samples < 2 {
            return Err(invalid("deform.scan_samples", "must be at least 2"));
        }

        match (&self.sweep, self.command) {
            (None, Command::Sweep) => return Err(invalid("sweep", "missing for command = sweep")),
            (Some(sw), _) => {
                if sw.target == Command::Sweep {
                    return Err(invalid("sweep.target", "cannot be sweep"));
                }
                for &e in &sw.eps {
                    check_eps("sweep.eps", e)?;
                }
                for &h in &sw.h_t {
                    check_h("sweep.h_t", h)?;
                }
                for &r in &sw.r {
                    positive("sweep.R", r)?;
                }
                for &q in &sw.q {
                    positive("sweep.Q", q)?;
                }
                if self.command == Command::Sweep
                    && sw.eps.is_empty()
                    && sw.h_t.is_empty()
                    && sw.r.is_empty()
                    && sw.q.is_empty()
                {
                    return Err(invalid("sweep", "all lists are empty"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        let e = ExperimentConfig::from_toml("command = \"build\"\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn defaults_validate() {
        for c in [Command::Build, Command::Curvature, Command::SolveYamabe] {
            ExperimentConfig::new(c).validate().unwrap();
        }
        assert!(ExperimentConfig::new(Command::Sweep).validate().is_err());
    }

    #[test]
    fn bad_eps_names_key() {
        let mut c = ExperimentConfig::new(Command::Build);
        c.eps = 1.5;
        assert!(c.validate().unwrap_err().to_string().contains("`eps`"));
    }
}
