//! Simulation and verification of the elastic flow of planar three-curve
//! networks (Theta networks and Triods).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod linear;
pub mod network;
pub mod scenario;
pub mod velocity;

pub use error::{Error, Result};
