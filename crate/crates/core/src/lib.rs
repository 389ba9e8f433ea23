//! Numerics for the space-homogeneous Landau equation in nondivergence form
//! `f_t = ā_ij ∂_ij f + c̄ f`: velocity grids and functionals, convolution
//! coefficients, coefficient bound checks, explicit L∞ decay envelopes, an
//! explicit time stepper with conservation monitors, and a self-similar
//! blow-up family for the semilinear heat inequality.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod coefficients;
pub mod counterexample;
pub mod ellipticity;
pub mod error;
pub mod field;
pub mod grid;
pub mod solver;
pub mod spectral;

pub use coefficients::{
    compute_coefficients, compute_coefficients_reference, divergence_identity_residual, CoefficientField, KernelParams,
    SymMatrix,
};
pub use error::{Error, Result};
pub use field::{PhysicalSummary, ScalarField};
pub use grid::VelocityGrid;
