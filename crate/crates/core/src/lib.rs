//! Surrogate-modeling toolkit for structural dynamics under harmonic loading.
//!
//! The crate bundles exact reference solvers for linear/nonlinear SDOF and
//! MDOF systems, Latin-hypercube dataset generation, a small from-scratch
//! trainable layer kit (FC, sparse FC, 1-D convolution, batch normalization),
//! an Adam-based trainer, magnitude-based sparsification with weight transfer,
//! and network growth via two-phase transfer learning.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod nn;
pub mod sampling;
pub mod sparsify;
pub mod train;
pub mod util;

pub use error::{Error, Result};
