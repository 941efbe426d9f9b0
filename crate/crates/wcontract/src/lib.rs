//! Discrete Bakry–Émery calculus on 1-D grids, exact 1-D Wasserstein distances and
//! numerical checks of dimensional contraction, EVI and functional inequalities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod funcineq;
pub mod functionals;
pub mod gradflow;
pub mod grid;
pub mod harness;
pub mod report;
pub mod runner;
pub mod scalar;
pub mod semigroup;
pub mod suites;
pub mod transport;

pub use error::{Error, Result};
pub use report::CheckReport;

pub type Grid = grid::WeightedGrid<f64>;
pub type Density = grid::GridDensity<f64>;
pub type Generator = grid::GeneratorMatrix<f64>;
pub type Params = grid::CurvatureParams<f64>;
pub type Spectral = semigroup::SpectralDecomposition<f64>;
pub type Space = harness::Space<f64>;
pub type Potential = grid::Potential<f64>;
pub type FlowPotential = gradflow::PotentialSpec<f64>;
