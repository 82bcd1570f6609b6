//! Isogeometric lattice Boltzmann solver.
//!
//! A D2Q9 BGK model whose convection term is discretized by NURBS
//! collocation on a body-fitted patch and integrated with classical RK4.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops over
// lattice directions read closer to the formulas than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmarks;
pub mod collocation;
pub mod error;
pub mod io;
pub mod lattice;
pub mod nurbs;
pub mod solver;

pub use error::{Error, Result};
