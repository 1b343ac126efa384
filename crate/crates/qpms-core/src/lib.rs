//! Numerical construction of quasi-periodic minimal surfaces in R^2 x S^1.
//!
//! The pipeline solves a singular Dirichlet problem for the maximal graph
//! equation on a truncated horizontal strip, builds the discrete conjugate
//! 1-forms, integrates the conjugate minimal immersion, solves the period
//! problem by coordinate bisection inside a Miranda box, and assembles a
//! triangulated mesh of the resulting surface together with diagnostic
//! reports (handle sizes, divergence ridges, boundary flux, curvature).

pub mod conjugation;
pub mod diagnostics;
pub mod maximal_solver;
pub mod period_engine;
pub mod period_solver;
pub mod pipeline;
pub mod sequences;
pub mod strip_domain;
pub mod surface_builder;

mod band;
mod grid;

pub use grid::{CellField, Grid};
