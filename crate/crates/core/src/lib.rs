//! Numerical certification of stochastic self-duality for interacting
//! particle systems and their diffusion limits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod diffops;
pub mod error;
pub mod linalg;
pub mod processes;
pub mod report;
pub mod simulate;
pub mod specfun;
pub mod suite;

pub use error::{Error, Result};
