//! Shared fixtures for the solver benchmarks.

use gluing_core::{CapPair, GluedGeometry, SolveParams};

pub fn fixture(n: usize, eps: f64) -> GluedGeometry {
    CapPair::new(n, 1.0, 2.0)
        .build(eps, &SolveParams::default(), 1.0, 1.0)
        .expect("benchmark geometry")
}
