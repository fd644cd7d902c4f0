//! Nehari-manifold solver for nonnegative least-energy solutions of critical coupled
//! Schrödinger systems on radial balls.

// `!(a > b)` is used on purpose so that NaN fails the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod limits;
pub mod model;
pub mod nehari;
mod newton;
pub mod solver;
pub mod sphere;

pub use error::{Error, Result};
