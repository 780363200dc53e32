//! Numerical laboratory for N-player stochastic differential games on
//! weighted interaction networks.
//!
//! The crate computes closed-loop, open-loop, distributed and mean-field
//! equilibria of linear-quadratic network games (exactly, through Riccati
//! systems), solves the deterministic forward-backward characteristics for
//! general smooth costs, and runs the scaling experiments that compare the
//! equilibria on common random numbers.
//!
//! Module map:
//!
//! - [`game`]: game instances, interaction matrices, time grids and the shared
//!   Brownian increments.
//! - [`diagnostics`]: semi-monotonicity constants, interaction strengths and
//!   graph statistics.
//! - [`riccati`]: exact LQ equilibria and coupled path simulation.
//! - [`fbsde`]: shooting, LSMC-Picard and McKean-Vlasov solvers.
//! - [`measures`]: Wasserstein distances, rate functions and the weighted
//!   empirical-measure experiment.
//! - [`experiments`]: sweeps, rate fits and file output used by the CLI.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fbsde;
pub mod format;
pub mod game;
pub mod linalg;
pub mod measures;
pub mod riccati;

pub use error::{GameError, Result};
