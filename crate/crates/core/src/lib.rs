//! Numerical engine for truncated metric connections on contact
//! sub-Finsler manifolds.
//!
//! Given a contact structure in adapted coordinates ([`chart::Chart`]) and a
//! fiberwise 2-homogeneous energy ([`finsler::FinslerMetric`]), the engine
//! builds the interior and extension coefficients of the unique symmetric
//! metric truncated connection, its Schouten tensors, Wagner-type curvature,
//! and parallel transport, together with independent numerical oracles for
//! each identity.

#![allow(clippy::needless_range_loop)]

pub mod chart;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod finsler;
pub mod jets;
pub mod linalg;
pub mod presets;
pub mod sampling;
pub mod transport;

pub use error::{Error, Result};
