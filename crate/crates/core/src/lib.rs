//! Mean-field game edge caching for ultra-dense small-cell networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: Poisson layouts, active probability, interference and
//!   the average rate per unit bandwidth seen by a typical user.
//! - [`demand`]: Chinese-restaurant-process request histories and
//!   Ornstein-Uhlenbeck short-term popularity.
//! - [`cost`]: backhaul, storage and overlap costs.
//! - [`solver`]: the coupled HJB / Fokker-Planck finite-difference solver
//!   and the closed-form water-filling control.
//! - [`policy`]: mean-field, popularity-baseline and uniform-random caching.
//! - [`sim`]: time-stepped multi-SBS simulation and metrics.
//! - [`scenario`] and [`experiments`]: configuration files and the
//!   experiment recipes behind the command-line tool.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod demand;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod policy;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
