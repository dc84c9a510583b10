//! Numerical laboratory for two-person zero-sum stochastic differential
//! games in feedback form.
//!
//! The pipeline: a [`model::GameSpec`] describes the game (finite control
//! sets, bounded coefficients, terminal payoff); [`chain`] builds a locally
//! consistent Markov-chain kernel on the lattice; [`dpp`] runs the backward
//! sup-inf / inf-sup recursion to produce lower and upper value fields and
//! feedback policies; [`pdefd`] solves the corresponding Bellman-Isaacs
//! equation with a monotone finite-difference scheme as an independent
//! cross-oracle; [`saddle`] extracts and verifies approximate saddle
//! points; [`counterexample`] reproduces the strong-formulation value gap
//! experiment; [`diagnostics`] turns the a-priori estimates into check
//! suites.

// Index loops over small fixed-dimension arrays and the solver's wide
// argument lists are the clearer spelling here.
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod counterexample;
pub mod diagnostics;
pub mod dpp;
pub mod error;
pub mod linalg;
pub mod model;
pub mod pdefd;
pub mod artifacts;
pub mod chain;
pub mod hamiltonian;
pub mod saddle;
pub mod stencil;
pub mod tolerances;

pub use error::{LabError, Result};
