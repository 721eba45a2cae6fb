//! Spherical-harmonic mode reduction of time-domain combined-field integral
//! equations for the wave equation.
//!
//! On the unit sphere the combined-field operator with constant coefficients
//! `a = α`, `b = β` decouples into one scalar delay-integral equation per
//! spherical-harmonic degree `n`:
//!
//! ```text
//! (1+α)/2 f(t) + (-1)^n (1-α)/2 f(t-2) - ∫_0^2 Q_n(s) f(t-s) ds = g(t)
//! ```
//!
//! The crate provides
//! - [`special_functions`]: Legendre polynomials, Gauss-Legendre rules, Lagrange weights;
//! - [`mode_equation`]: the mode equation itself and a direct operator evaluation;
//! - [`time_solver`]: Adams-Bashforth-Moulton marching with Lagrange history interpolation;
//! - [`oracles`]: independent solutions used for validation;
//! - [`laplace_analysis`]: the Laplace symbol, its roots, decay-rate fitting;
//! - [`stationary_phase`]: high-frequency asymptotics of layer potentials on convex bodies;
//! - [`experiment`]: the command-line experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod laplace_analysis;
pub mod mode_equation;
pub mod oracles;
pub mod special_functions;
pub mod stationary_phase;
pub mod time_solver;

pub use error::{Error, Result};
pub use mode_equation::{BoundarySignal, DelayCoefficients, ModeParams};
pub use time_solver::{HistoryBuffer, SolverConfig};
