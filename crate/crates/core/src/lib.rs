//! Simulation and verification engine for Poisson-Boolean continuum
//! percolation on `R^d`.
//!
//! The model: centers form a Poisson process of intensity `lambda` on `R^d`,
//! each center carries an independent radius drawn from a [`RadiusLaw`], and
//! the occupied set is the union of the closed balls. The crate provides
//!
//! * radius laws with exact tails, samplers and moments ([`radius_laws`]),
//! * closed-form one-ball probabilities evaluated by quadrature ([`analytic`]),
//! * windowed and cell-stratified samplers with counter-based streams ([`sampler`]),
//! * cluster construction over a hierarchical grid ([`connectivity`]),
//! * Monte Carlo estimators and critical-intensity searches ([`estimators`]),
//! * the exploration algorithm, revealments, influences and Russo checks ([`osss_lab`]),
//! * inequality and decay harnesses ([`analysis`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod analytic;
pub mod connectivity;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod grid;
pub mod osss_lab;
pub mod quadrature;
pub mod radius_laws;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod union_find;

pub use analytic::{ClosedForm, GeometryConstants};
pub use connectivity::ClusterIndex;
pub use error::{Error, Result};
pub use estimators::{CriticalEstimate, CriticalMethod, ThetaCurve};
pub use geometry::Point;
pub use radius_laws::{Moment, RadiusLaw};
pub use sampler::{Ball, BallConfig, CellCoord, ModelSpec};
pub use stats::Estimate;
