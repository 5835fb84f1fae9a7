//! Simulation and reconstruction toolkit for quantitative thermo-acoustic imaging.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod cli;
pub mod error;
pub mod grid;
pub mod helmholtz;
pub mod inversion;
pub mod linalg;
pub mod probes;
pub mod refine;

pub use error::{Error, Result};
