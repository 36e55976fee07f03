//! Dual-network solvers for two-dimensional elliptic interface problems.
//!
//! The crate couples one network per subdomain (an MLP or a Kolmogorov–Arnold
//! network with B-spline edges) through a physics-informed loss with explicit
//! value and flux jump terms, and refines the interior collocation sets with
//! residual-driven adaptive resampling.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diff;
pub mod geometry;
pub mod networks;
pub mod problems;
pub mod sampling;
pub mod loss;
pub mod reporting;
pub mod training;
pub mod config;
pub mod experiment;
pub mod cli;
