//! The discrete glued manifold.
//!
//! Everything is reduced to the zeroth spherical mode, so the glued
//! manifold becomes a path graph:
//!
//! ```text
//! lump1 -- t_1 -- t_2 -- ... -- t_N -- lump2
//! ```
//!
//! `t_1 = log ε` and `t_N = -log ε` are the collar boundaries `|x| = 1` of
//! the two caps (see [`chart_map`]). Each cap is modelled by one lump node
//! of prescribed volume attached to a flat radial collar; the collar of
//! cap `i` is sampled at the images of the neck nodes, so the cap graph and
//! the glued graph share their node positions.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::curvature::Deformation;
use crate::error::{GluingError, Result};
use crate::operator::PathLaplacian;

/// Upper bound on the neck spacing.
pub const MAX_H_T: f64 = 0.05;

/// Tolerance on the relative second-difference error for `e^{±kt}`.
pub const RESOLUTION_TOL: f64 = 1e-6;

/// Distance between a lump node and the collar boundary, used for the
/// lump coupling conductance.
const LUMP_LINK: f64 = 1.0;

/// `6x^5 - 15x^4 + 10x^3` on `[0, 1]`, clamped outside.
pub fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

/// Area of the unit `d`-sphere in `R^{d+1}`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 1.0) * sphere_area(d - 2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::One => 1,
            Side::Two => 2,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::One => Side::Two,
            Side::Two => Side::One,
        }
    }
}

/// Where `chart_map` sends a neck coordinate: `|x| = ε e^{-t}` on side 1 and
/// `ε e^{t}` on side 2.
pub fn chart_map(side: Side, t: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(GluingError::param("eps", format!("{eps} not in (0, 1)")));
    }
    let l = -eps.ln();
    // Allow rounding from grid construction.
    let slack = 1e-12 * l.max(1.0);
    if !(t.abs() <= l + slack) {
        return Err(GluingError::param(
            "t",
            format!("{t} outside the neck [{}, {l}]", -l),
        ));
    }
    Ok(match side {
        Side::One => eps * (-t).exp(),
        Side::Two => eps * t.exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCap {
    pub total_dim: usize,
    pub codim: usize,
    pub lump_volume: f64,
    pub side: Side,
    /// Radial collar nodes, increasing from `ε²` to 1. Empty until the cap
    /// has been placed in a glued geometry.
    pub collar_grid: Vec<f64>,
}

impl ModelCap {
    /// A cap for an ordinary connected sum (`k = 0`, so `n = m`).
    pub fn new(m: usize, lump_volume: f64, side: Side) -> Result<Self> {
        Self::with_codim(m, m, lump_volume, side)
    }

    pub fn with_codim(m: usize, n: usize, lump_volume: f64, side: Side) -> Result<Self> {
        if m < 3 {
            return Err(GluingError::param("m", format!("{m} < 3")));
        }
        if n < 3 || n > m {
            return Err(GluingError::param("n", format!("{n} not in [3, m = {m}]")));
        }
        if !(lump_volume > 0.0 && lump_volume.is_finite()) {
            return Err(GluingError::param(
                "lump_volume",
                format!("{lump_volume} is not positive"),
            ));
        }
        Ok(Self {
            total_dim: m,
            codim: n,
            lump_volume,
            side,
            collar_grid: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Neck spacing; `None` picks the largest spacing that passes the
    /// resolution check.
    pub h_t: Option<f64>,
    /// Lower bound on the number of neck nodes.
    pub collar_nodes: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            h_t: None,
            collar_nodes: 0,
        }
    }
}

/// Largest spacing for which the second difference of `e^{±kt}`,
/// `k = (n-2)/2`, is within [`RESOLUTION_TOL`] relative.
pub fn auto_spacing(n: usize) -> f64 {
    let k = (n as f64 - 2.0) / 2.0;
    (0.9 * (12.0 * RESOLUTION_TOL).sqrt() / k).min(MAX_H_T)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckChart {
    pub eps: f64,
    pub alpha: f64,
    pub n: usize,
    pub t_nodes: Vec<f64>,
    pub h_t: f64,
}

impl NeckChart {
    /// Uniform grid on `[log ε, -log ε]` with spacing at most `max_h` and at
    /// least `min_nodes` nodes, symmetric about 0.
    pub fn new(n: usize, eps: f64, alpha: f64, max_h: f64, min_nodes: usize) -> Result<Self> {
        if n < 3 {
            return Err(GluingError::param("n", format!("{n} < 3")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(GluingError::param("eps", format!("{eps} not in (0, 1)")));
        }
        let l = -eps.ln();
        if !(alpha > 0.0) {
            return Err(GluingError::param(
                "alpha",
                format!("{alpha} is not positive"),
            ));
        }
        if !(alpha < l - 1.0) {
            return Err(GluingError::param(
                "alpha",
                format!("{alpha} must be below |log eps| - 1 = {}", l - 1.0),
            ));
        }
        if !(max_h > 0.0 && max_h <= MAX_H_T) {
            return Err(GluingError::Resolution(format!(
                "h_t = {max_h} exceeds the resolution floor {MAX_H_T}"
            )));
        }
        let count = ((2.0 * l / max_h).ceil() as usize + 1)
            .max(min_nodes)
            .max(3);
        let h = 2.0 * l / (count as f64 - 1.0);
        let mid = (count as f64 - 1.0) / 2.0;
        let t_nodes = (0..count).map(|j| (j as f64 - mid) * h).collect();
        Ok(Self {
            eps,
            alpha,
            n,
            t_nodes,
            h_t: h,
        })
    }

    /// `|log ε|`.
    pub fn half_length(&self) -> f64 {
        -self.eps.ln()
    }

    pub fn len(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_nodes.is_empty()
    }

    /// `(n-2)/2`.
    pub fn decay(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    /// First neck index with `t >= x - tol`.
    pub fn first_at_or_after(&self, x: f64) -> usize {
        let tol = 1e-9 * self.h_t;
        self.t_nodes
            .iter()
            .position(|&t| t >= x - tol)
            .unwrap_or(self.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cutoff {
    Zeta,
    EtaPlus,
    EtaMinus,
    Chi1,
    Chi2,
    ChiP,
    Phi1,
    Phi2,
}

impl Cutoff {
    pub const ALL: [Cutoff; 8] = [
        Cutoff::Zeta,
        Cutoff::EtaPlus,
        Cutoff::EtaMinus,
        Cutoff::Chi1,
        Cutoff::Chi2,
        Cutoff::ChiP,
        Cutoff::Phi1,
        Cutoff::Phi2,
    ];

    /// Value on the two lump nodes `(lump1, lump2)`.
    pub fn lump_values(self) -> (f64, f64) {
        match self {
            Cutoff::Zeta | Cutoff::EtaPlus | Cutoff::Chi1 | Cutoff::Phi1 => (1.0, 0.0),
            Cutoff::EtaMinus | Cutoff::Chi2 | Cutoff::Phi2 => (0.0, 1.0),
            Cutoff::ChiP => (0.0, 0.0),
        }
    }
}

/// Closed-form cutoff profiles for a neck of half length `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfiles {
    pub half_length: f64,
    pub alpha: f64,
}

impl CutoffProfiles {
    pub fn eval(&self, c: Cutoff, t: f64) -> f64 {
        let l = self.half_length;
        let a = self.alpha;
        let eta = |t: f64| 1.0 - smoothstep5(t - (l - 1.0));
        let chi1 = |t: f64| 1.0 - smoothstep5(t - (-l + a));
        let phi1 = |t: f64| 1.0 - smoothstep5(t - (-l + a + 1.0));
        match c {
            Cutoff::Zeta => 1.0 - smoothstep5((t + 1.0) / 2.0),
            Cutoff::EtaPlus => eta(t),
            Cutoff::EtaMinus => eta(-t),
            Cutoff::Chi1 => chi1(t),
            Cutoff::Chi2 => chi1(-t),
            Cutoff::ChiP => 1.0 - chi1(t) - chi1(-t),
            Cutoff::Phi1 => phi1(t),
            Cutoff::Phi2 => phi1(-t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSet {
    pub profiles: CutoffProfiles,
    pub zeta: Vec<f64>,
    pub eta_plus: Vec<f64>,
    pub eta_minus: Vec<f64>,
    pub chi1: Vec<f64>,
    pub chi2: Vec<f64>,
    pub chi_p: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

impl CutoffSet {
    /// Neck samples of one profile.
    pub fn neck(&self, c: Cutoff) -> &[f64] {
        match c {
            Cutoff::Zeta => &self.zeta,
            Cutoff::EtaPlus => &self.eta_plus,
            Cutoff::EtaMinus => &self.eta_minus,
            Cutoff::Chi1 => &self.chi1,
            Cutoff::Chi2 => &self.chi2,
            Cutoff::ChiP => &self.chi_p,
            Cutoff::Phi1 => &self.phi1,
            Cutoff::Phi2 => &self.phi2,
        }
    }

    /// The profile on every glued node, lumps included.
    pub fn glued(&self, c: Cutoff) -> Vec<f64> {
        let (a, b) = c.lump_values();
        let neck = self.neck(c);
        let mut out = Vec::with_capacity(neck.len() + 2);
        out.push(a);
        out.extend_from_slice(neck);
        out.push(b);
        out
    }
}

pub fn make_cutoffs(neck: &NeckChart) -> Result<CutoffSet> {
    if neck.h_t > MAX_H_T {
        return Err(GluingError::Resolution(format!(
            "h_t = {} cannot resolve a unit transition band",
            neck.h_t
        )));
    }
    let profiles = CutoffProfiles {
        half_length: neck.half_length(),
        alpha: neck.alpha,
    };
    let sample =
        |c: Cutoff| -> Vec<f64> { neck.t_nodes.iter().map(|&t| profiles.eval(c, t)).collect() };
    let chi1 = sample(Cutoff::Chi1);
    let chi2 = sample(Cutoff::Chi2);
    // Defined by subtraction so that the partition is exact.
    let chi_p = chi1.iter().zip(&chi2).map(|(a, b)| 1.0 - a - b).collect();
    Ok(CutoffSet {
        profiles,
        zeta: sample(Cutoff::Zeta),
        eta_plus: sample(Cutoff::EtaPlus),
        eta_minus: sample(Cutoff::EtaMinus),
        chi1,
        chi2,
        chi_p,
        phi1: sample(Cutoff::Phi1),
        phi2: sample(Cutoff::Phi2),
    })
}

/// Closed form of the glued conformal factor
/// `u(t) = η(t) A ε^k e^{-kt} + η(-t) B ε^k e^{kt}`, `k = (n-2)/2`, with the
/// homothety amplitudes `A = R^{(n-2)/4}`, `B = Q^{(n-2)/4}`. Beyond the
/// ends of the neck the vanishing branch is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalProfile {
    pub eps: f64,
    pub decay: f64,
    pub amp1: f64,
    pub amp2: f64,
    pub half_length: f64,
}

impl ConformalProfile {
    pub fn new(n: usize, eps: f64, r: f64, q: f64) -> Self {
        let decay = (n as f64 - 2.0) / 2.0;
        Self {
            eps,
            decay,
            amp1: r.powf(decay / 2.0),
            amp2: q.powf(decay / 2.0),
            half_length: -eps.ln(),
        }
    }

    fn eta(&self, t: f64) -> f64 {
        1.0 - smoothstep5(t - (self.half_length - 1.0))
    }

    /// Flat branch of side 1, `A ε^k e^{-kt}`.
    pub fn branch1(&self, t: f64) -> f64 {
        self.amp1 * (self.decay * (self.eps.ln() - t)).exp()
    }

    /// Flat branch of side 2, `B ε^k e^{kt}`.
    pub fn branch2(&self, t: f64) -> f64 {
        self.amp2 * (self.decay * (self.eps.ln() + t)).exp()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eta(t) * self.branch1(t) + self.eta(-t) * self.branch2(t)
    }
}

pub fn conformal_factor(neck: &NeckChart, cutoffs: &CutoffSet) -> Vec<f64> {
    conformal_factor_scaled(neck, cutoffs, 1.0, 1.0)
}

pub(crate) fn conformal_factor_scaled(
    neck: &NeckChart,
    cutoffs: &CutoffSet,
    r: f64,
    q: f64,
) -> Vec<f64> {
    let p = ConformalProfile::new(neck.n, neck.eps, r, q);
    neck.t_nodes
        .iter()
        .zip(cutoffs.eta_plus.iter().zip(&cutoffs.eta_minus))
        .map(|(&t, (ep, em))| ep * p.branch1(t) + em * p.branch2(t))
        .collect()
}

/// The pure model cap `(M_i, R g_i)` as a path graph: index 0 is the lump,
/// index `i >= 1` is the collar node at the image of the neck node
/// `glued_index[i]`, ordered outward-in (from `|x| = 1` down to `|x| = ε²`).
#[derive(Debug, Clone, PartialEq)]
pub struct CapOperator {
    pub side: Side,
    pub laplacian: PathLaplacian,
    /// Glued node index of each cap node.
    pub glued_index: Vec<usize>,
    /// Radial coordinate `|x|` of each cap node (1 for the lump).
    pub rho: Vec<f64>,
    /// Conformal amplitude `A` (side 1) or `B` (side 2).
    pub amplitude: f64,
}

impl CapOperator {
    pub fn len(&self) -> usize {
        self.glued_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glued_index.is_empty()
    }

    /// Restriction of a glued field to the cap nodes.
    pub fn restrict(&self, glued: &[f64]) -> Vec<f64> {
        self.glued_index.iter().map(|&g| glued[g]).collect()
    }

    /// Extension of a cap field to the glued nodes.
    pub fn extend(&self, cap: &[f64], glued_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; glued_len];
        for (&g, v) in self.glued_index.iter().zip(cap) {
            out[g] = *v;
        }
        out
    }
}

/// Where a glued node lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    Lump1,
    Neck,
    Lump2,
}

impl Chart {
    pub fn as_str(self) -> &'static str {
        match self {
            Chart::Lump1 => "lump1",
            Chart::Neck => "neck",
            Chart::Lump2 => "lump2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GluedGeometry {
    pub cap1: ModelCap,
    pub cap2: ModelCap,
    pub neck: NeckChart,
    pub cutoffs: CutoffSet,
    pub profile: ConformalProfile,
    /// Conformal factor on the neck nodes.
    pub u_eps: Vec<f64>,
    /// Node volumes on every glued node.
    pub vol_weight: Vec<f64>,
    pub r: f64,
    pub q: f64,
    pub deform: Option<Deformation>,
    /// Additive curvature corrections per side, blended by `ζ` and `1 - ζ`.
    pub curvature_correction: Option<[Vec<f64>; 2]>,
    pub sphere_area: f64,
    laplacian: PathLaplacian,
    caps: [CapOperator; 2],
    id: u64,
}

impl GluedGeometry {
    /// Number of glued nodes (`N + 2`).
    pub fn len(&self) -> usize {
        self.vol_weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vol_weight.is_empty()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn eps(&self) -> f64 {
        self.neck.eps
    }

    pub fn alpha(&self) -> f64 {
        self.neck.alpha
    }

    pub fn m(&self) -> usize {
        self.cap1.total_dim
    }

    pub fn n(&self) -> usize {
        self.neck.n
    }

    pub fn lump_index(&self, side: Side) -> usize {
        match side {
            Side::One => 0,
            Side::Two => self.len() - 1,
        }
    }

    /// Glued index of neck node `j`.
    pub fn neck_index(&self, j: usize) -> usize {
        j + 1
    }

    pub fn chart(&self, node: usize) -> Chart {
        if node == 0 {
            Chart::Lump1
        } else if node + 1 == self.len() {
            Chart::Lump2
        } else {
            Chart::Neck
        }
    }

    /// `t` for neck nodes, `None` for lumps.
    pub fn t(&self, node: usize) -> Option<f64> {
        match self.chart(node) {
            Chart::Neck => Some(self.neck.t_nodes[node - 1]),
            _ => None,
        }
    }

    /// Coordinate reported in dumps: `t` on the neck, the collar radius the
    /// lump attaches to (1) on lumps.
    pub fn coordinate(&self, node: usize) -> f64 {
        self.t(node).unwrap_or(1.0)
    }

    pub fn laplacian(&self) -> &PathLaplacian {
        &self.laplacian
    }

    pub fn cap_operator(&self, side: Side) -> &CapOperator {
        &self.caps[side.index() - 1]
    }

    pub fn cutoff(&self, c: Cutoff) -> Vec<f64> {
        self.cutoffs.glued(c)
    }

    pub fn total_volume(&self) -> f64 {
        self.vol_weight.iter().sum()
    }

    /// Returns a copy carrying a deformation `g_ε + r h_1 + s h_2`.
    pub fn with_deformation(&self, deform: Deformation) -> Result<Self> {
        deform.validate(self)?;
        let mut g = self.clone();
        g.deform = Some(deform);
        g.refresh_id();
        Ok(g)
    }

    /// Returns a copy carrying user-supplied curvature corrections on each
    /// side (one value per glued node). Side `i` is weighted by `ζ` resp.
    /// `1 - ζ` so that it dies out across the neck.
    pub fn with_curvature_correction(&self, side1: Vec<f64>, side2: Vec<f64>) -> Result<Self> {
        if side1.len() != self.len() || side2.len() != self.len() {
            return Err(GluingError::DimensionMismatch(format!(
                "correction profiles of length {} and {} for {} nodes",
                side1.len(),
                side2.len(),
                self.len()
            )));
        }
        let mut g = self.clone();
        g.curvature_correction = Some([side1, side2]);
        g.refresh_id();
        Ok(g)
    }

    fn refresh_id(&mut self) {
        let mut h = DefaultHasher::new();
        self.id.hash(&mut h);
        if let Some(d) = &self.deform {
            d.r.to_bits().hash(&mut h);
            d.s.to_bits().hash(&mut h);
        }
        if let Some([a, b]) = &self.curvature_correction {
            for x in a.iter().chain(b) {
                x.to_bits().hash(&mut h);
            }
        }
        self.id = h.finish();
    }
}

#[allow(clippy::too_many_arguments)]
pub fn build_glued_geometry(
    cap1: &ModelCap,
    cap2: &ModelCap,
    eps: f64,
    alpha: f64,
    r: f64,
    q: f64,
    grid: &GridParams,
) -> Result<GluedGeometry> {
    if cap1.total_dim != cap2.total_dim || cap1.codim != cap2.codim {
        return Err(GluingError::DimensionMismatch(format!(
            "caps have (m, n) = ({}, {}) and ({}, {})",
            cap1.total_dim, cap1.codim, cap2.total_dim, cap2.codim
        )));
    }
    if cap1.side != Side::One || cap2.side != Side::Two {
        return Err(GluingError::param(
            "side",
            "caps must be given as (side 1, side 2)",
        ));
    }
    if !(eps > 0.0 && eps < (-alpha).exp()) {
        return Err(GluingError::param(
            "eps",
            format!("{eps} not in (0, e^-alpha) for alpha = {alpha}"),
        ));
    }
    for (name, v) in [("R", r), ("Q", q)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(GluingError::param(name, format!("{v} is not positive")));
        }
    }
    let m = cap1.total_dim;
    let n = cap1.codim;
    let h_req = grid.h_t.unwrap_or_else(|| auto_spacing(n));
    let neck = NeckChart::new(n, eps, alpha, h_req, grid.collar_nodes)?;
    let cutoffs = make_cutoffs(&neck)?;
    let profile = ConformalProfile::new(n, eps, r, q);
    let u_eps = conformal_factor_scaled(&neck, &cutoffs, r, q);
    let omega = sphere_area(n - 1);
    let vol_exp = 2.0 * n as f64 / (n as f64 - 2.0);
    let h = neck.h_t;
    let big_n = neck.len();

    let neck_volume = |u: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = u.iter().map(|x| omega * x.powf(vol_exp) * h).collect();
        v[0] *= 0.5;
        v[big_n - 1] *= 0.5;
        v
    };
    let neck_conductance =
        |u: &[f64]| -> Vec<f64> { u.windows(2).map(|w| omega * w[0] * w[1] / h).collect() };
    let scale1 = r.powf(m as f64 / 2.0);
    let scale2 = q.powf(m as f64 / 2.0);
    let lump1 = cap1.lump_volume * scale1;
    let lump2 = cap2.lump_volume * scale2;

    let mut vol_weight = Vec::with_capacity(big_n + 2);
    vol_weight.push(lump1);
    vol_weight.extend(neck_volume(&u_eps));
    vol_weight.push(lump2);
    let mut conductance = Vec::with_capacity(big_n + 1);
    conductance.push(omega * u_eps[0] * u_eps[0] / LUMP_LINK);
    conductance.extend(neck_conductance(&u_eps));
    conductance.push(omega * u_eps[big_n - 1] * u_eps[big_n - 1] / LUMP_LINK);
    let laplacian = PathLaplacian::new(conductance, vol_weight.clone())?;

    let make_cap = |side: Side| -> Result<CapOperator> {
        let (lump, amp) = match side {
            Side::One => (lump1, profile.amp1),
            Side::Two => (lump2, profile.amp2),
        };
        // Cap node i >= 1 sits at glued index i (side 1) or N + 1 - i (side 2).
        let glued_index: Vec<usize> = std::iter::once(match side {
            Side::One => 0,
            Side::Two => big_n + 1,
        })
        .chain((1..=big_n).map(|i| match side {
            Side::One => i,
            Side::Two => big_n + 1 - i,
        }))
        .collect();
        let ts: Vec<f64> = glued_index[1..]
            .iter()
            .map(|&g| neck.t_nodes[g - 1])
            .collect();
        let u: Vec<f64> = ts
            .iter()
            .map(|&t| match side {
                Side::One => profile.branch1(t),
                Side::Two => profile.branch2(t),
            })
            .collect();
        let mut vol = vec![lump];
        vol.extend(neck_volume(&u));
        let mut cond = vec![omega * u[0] * u[0] / LUMP_LINK];
        cond.extend(neck_conductance(&u));
        let mut rho = vec![1.0];
        rho.extend(ts.iter().map(|&t| match side {
            Side::One => eps * (-t).exp(),
            Side::Two => eps * t.exp(),
        }));
        Ok(CapOperator {
            side,
            laplacian: PathLaplacian::new(cond, vol)?,
            glued_index,
            rho,
            amplitude: amp,
        })
    };
    let caps = [make_cap(Side::One)?, make_cap(Side::Two)?];

    let collar: Vec<f64> = {
        let mut c: Vec<f64> = caps[0].rho[1..].to_vec();
        c.reverse();
        c
    };
    let mut cap1 = cap1.clone();
    let mut cap2 = cap2.clone();
    cap1.collar_grid = collar.clone();
    cap2.collar_grid = collar;

    let mut hasher = DefaultHasher::new();
    (m, n, big_n).hash(&mut hasher);
    for x in [eps, alpha, r, q, cap1.lump_volume, cap2.lump_volume, h] {
        x.to_bits().hash(&mut hasher);
    }

    Ok(GluedGeometry {
        cap1,
        cap2,
        neck,
        cutoffs,
        profile,
        u_eps,
        vol_weight,
        r,
        q,
        deform: None,
        curvature_correction: None,
        sphere_area: omega,
        laplacian,
        caps,
        id: hasher.finish(),
    })
}

/// The default `α = |log ε| / (2(n-2))`.
pub fn default_alpha(n: usize, eps: f64) -> f64 {
    -eps.ln() / (2.0 * (n as f64 - 2.0))
}
