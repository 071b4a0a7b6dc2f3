//! Simulation and Monte Carlo verification of the radial Poissonian web.
//!
//! The crate builds radial coalescing paths on a lazily materialized
//! Poisson field, maps them into a time strip and onto the bridge window,
//! samples the independent-increment chain that governs the transformed
//! paths, and checks the limit laws of the model statistically.

// Guards of the form `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod config;
pub mod error;
pub mod estimators;
pub mod export;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod path;
pub mod radial;
pub mod reference;
pub mod seeds;
pub mod stats;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use field::{IntensityLaw, LazyPointField, RegionQuery};
pub use geometry::{ModelParams, PlanarPoint, PolarPoint};
pub use path::{PathPolyline, Provenance, WebEnsemble};
pub use stats::StatsReport;
