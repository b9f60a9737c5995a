//! Interacting particle systems on finite lattices.
//!
//! Models are written as rate-weighted families of local maps and simulated
//! through their Poisson graphical representation. On top of the simulator the
//! crate provides exact duality checks, mean-field limits, monotone couplings
//! and an oriented-percolation comparison for the contact process.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod couplings;
pub mod duality;
pub mod error;
pub mod estimators;
pub mod graphical;
pub mod lattice;
pub mod maps;
pub mod meanfield;
pub mod models;
pub mod percolation;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
