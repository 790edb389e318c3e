//! Seeded random smooth fields for property checks and sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{mean_zero_values, WeightProfile};
use crate::geometry::GluedGeometry;

/// A few random cosine modes in `t` plus random lump values.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSample {
    pub modes: Vec<(f64, f64, f64)>,
    pub lumps: (f64, f64),
}

impl SmoothSample {
    pub fn draw(rng: &mut impl Rng, modes: usize) -> Self {
        Self {
            modes: (0..modes)
                .map(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.5..3.0),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect(),
            lumps: (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|(a, w, p)| a * (w * t + p).cos())
            .sum()
    }

    /// Values on the glued nodes; neck values are multiplied by
    /// `ψ^{-power}` when a weight is given.
    pub fn sample(&self, g: &GluedGeometry, weight: Option<(&WeightProfile, f64)>) -> Vec<f64> {
        (0..g.len())
            .map(|i| match g.t(i) {
                Some(t) => {
                    let w = weight.map_or(1.0, |(w, p)| w.psi[i].powf(-p));
                    w * self.eval(t)
                }
                None if i == 0 => self.lumps.0,
                None => self.lumps.1,
            })
            .collect()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean-zero random smooth source.
pub fn smooth_source(
    g: &GluedGeometry,
    rng: &mut impl Rng,
    weight: Option<(&WeightProfile, f64)>,
) -> Vec<f64> {
    let s = SmoothSample::draw(rng, 4);
    mean_zero_values(g, &s.sample(g, weight))
}

/// Random mean-zero field on the sphere `‖v‖_γ = radius`.
pub fn ball_sample(
    g: &GluedGeometry,
    rng: &mut impl Rng,
    w: &WeightProfile,
    gamma: f64,
    radius: f64,
) -> Vec<f64> {
    let f = smooth_source(g, rng, Some((w, gamma)));
    let norm = w.norm(&f, gamma);
    f.iter().map(|x| x * radius / norm).collect()
}
