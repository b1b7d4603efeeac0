//! Two-dimensional free-boundary Navier-Stokes flow with surface tension in
//! an arbitrary Lagrangian-Eulerian frame.
//!
//! The free boundary is a height field over a fixed reference circle, the
//! domain map is the harmonic extension of the boundary placement, and each
//! time step runs a penalized, linearized fixed-point iteration.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ale_map;
pub mod error;
pub mod fields_ops;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod smoothing;
pub mod selftest;
pub mod spectral;
pub mod stokes;
pub mod timestepper;

pub use error::{Error, Result};
