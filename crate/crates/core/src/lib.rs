//! Solvers for the semilinear time-fractional subdiffusion problem
//! `∂_t^α u - Δu = f(u)` on the unit square with homogeneous Dirichlet data.
//!
//! Time is discretized by backward Euler convolution quadrature ([`cq`]). Space uses the element
//! families in [`fespace`] on the uniform right-triangle meshes of [`mesh`].
//!
//! [`stepper`] advances the fully discrete schemes. [`harness`] measures convergence against the
//! independent reference values in [`oracle`].

// Literal constants carry full published precision; negated comparisons also reject NaN.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cq;
pub mod error;
pub mod fespace;
pub mod harness;
pub mod mesh;
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
