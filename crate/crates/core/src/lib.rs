//! Numerical gluing of scalar-flat manifolds along a thin neck, reduced to
//! the zeroth spherical mode.

pub mod balance;
pub mod banded;
pub mod curvature;
pub mod error;
pub mod fields;
pub mod fit;
pub mod geometry;
pub mod linsolve;
pub mod nonlinear;
pub mod operator;
pub mod sampling;

pub use balance::{
    BalanceResult, CapPair, DeformOutcome, DeformParams, DeformState, EigenvalueProbe, SolveParams,
};
pub use curvature::{ConformalConstants, Deformation, DeformationProfile};
pub use error::{GluingError, Result};
pub use fields::{GridField, WeightProfile};
pub use fit::{fit_slope, SlopeFit};
pub use geometry::{CutoffSet, GluedGeometry, GridParams, ModelCap, NeckChart, Side};
pub use linsolve::{ApproxSolveResult, LinearSolveResult, LinearSolver, ProjectionBasis};
pub use nonlinear::{BallParams, PicardState, YamabeSolver};
pub use operator::PathLaplacian;
