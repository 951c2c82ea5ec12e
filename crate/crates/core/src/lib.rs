//! Simulation of consensus-based distributed stochastic optimization over
//! explicit network topologies.
//!
//! The building blocks are:
//!
//! * [`graph`]: undirected communication topologies (ring, path, star,
//!   complete, grid, random tree, Erdős–Rényi).
//! * [`mixing`]: doubly stochastic mixing matrices (Metropolis and lazy
//!   Metropolis weights) and their spectral quantity `lambda`.
//! * [`objectives`]: first-order oracles (median, online ridge regression,
//!   random strongly convex quadratics).
//! * [`algorithms`]: consensus, distributed subgradient, DSGD, centralized
//!   subgradient and centralized SGD as step functions over explicit state.
//! * [`metrics`]: optimization error `U`, consensus error `V`, centralized
//!   error `R`, running averages, stopping and transient-time rules.
//!
//! All numerical code is generic over a [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod mixing;
pub mod objectives;
pub mod rng;
pub mod scalar;

pub use graph::{Graph, GraphError};
pub use linalg::DenseMatrix;
pub use scalar::Scalar;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type MixingMatrix = mixing::MixingMatrix<f64>;
pub type MixingMatrixF32 = mixing::MixingMatrix<f32>;
pub type StepSchedule = algorithms::StepSchedule<f64>;
pub type IterateBlock = algorithms::IterateBlock<f64>;
pub type CentralState = algorithms::CentralState<f64>;
pub type RunSpec = algorithms::RunSpec<f64>;
pub type RunTrace = metrics::RunTrace<f64>;
pub type AggregateTrace = metrics::AggregateTrace<f64>;
pub type MedianObjective = objectives::MedianObjective<f64>;
pub type RidgeObjective = objectives::RidgeObjective<f64>;
pub type RidgeParams = objectives::RidgeParams<f64>;
pub type QuadraticObjective = objectives::QuadraticObjective<f64>;
