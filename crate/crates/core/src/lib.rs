//! Mixed-noise removal for hyperspectral cubes.
//!
//! A noisy cube `Y` is split into a clean estimate `X`, sparse noise `S` and
//! Gaussian noise `N`. The clean part is kept spatially and spectrally smooth
//! by anisotropic total variation and low rank by an orthogonal
//! mode-3 factorization `X ~ G x_3 C` with nuclear-norm penalised abundance
//! slices. [`solver::solve`] runs the alternating direction method of
//! multipliers on that model.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for callers that do not care.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diff;
pub mod error;
pub mod factor;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod npy;
pub mod prox;
pub mod scalar;
pub mod solver;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use factor::MvtfFactors;
pub use metrics::{evaluate, MetricsReport};
pub use noise::{apply_case, NoiseSpec};
pub use npy::{read_cube, write_cube, Dtype};
pub use scalar::Real;
pub use solver::{solve, Solution, SolveReport, SolverParams};
pub use tensor::{Cube, Dims, Mat};

pub type Cube64 = Cube<f64>;
pub type Cube32 = Cube<f32>;
pub type Mat64 = Mat<f64>;
pub type Mat32 = Mat<f32>;
pub type Solution64 = Solution<f64>;
pub type Solution32 = Solution<f32>;
