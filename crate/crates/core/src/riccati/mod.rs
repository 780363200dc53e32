//! Exact equilibria of isotropic LQ network games.
//!
//! With `H(p) = |p|²/2` and costs whose `d×d` blocks are multiples of the
//! identity, every equilibrium notion reduces to ODEs on `n×n` (or scalar)
//! coefficients that act coordinate-wise on the flat state.
//!
//! - open loop: linear decoupling field `Y = Λ(t)X`, `Λ' = Λ² − M_F`,
//!   `Λ(T) = M_G`;
//! - closed loop: quadratic values `uⁱ = xᵀPⁱx/2`,
//!   `Pⁱ' = pⁱpⁱᵀ + Σ_{j≠i}(qʲe_jᵀPⁱ + Pⁱe_jqʲᵀ) − Sⁱ_F` with `qʲ = Pʲe_j`;
//! - distributed and mean field: scalar gain `π' = π² − (q_f + a_f)` plus an
//!   affine offset driven by the mean flow.
//!
//! Value-function constants are never integrated; they do not affect
//! feedbacks.

mod closed_loop;
mod diagnostics;
mod export;
mod mean;
pub(crate) mod ode;
mod open_loop;
mod simulate;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{GameSpec, LqCoefficients, TimeGrid};

pub use closed_loop::{solve_closed_loop_lq, solve_closed_loop_lq_with};
pub use diagnostics::{feedback_diagnostics, FeedbackProfile};
pub use export::{equilibrium_to_json, trajectories_to_csv};
pub use mean::{solve_distributed_lq, solve_mfg_lq, solve_mfg_lq_with, MeanFieldOptions, PicardOptions};
pub use open_loop::{solve_open_loop_lq, solve_open_loop_lq_with};
pub use simulate::{simulate, GapStat, Member, PairGap, RecordedPaths, SimulationOptions, TrajectoryBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    ClosedLoop,
    OpenLoop,
    Distributed,
    MeanField,
}

impl EquilibriumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquilibriumKind::ClosedLoop => "closed_loop",
            EquilibriumKind::OpenLoop => "open_loop",
            EquilibriumKind::Distributed => "distributed",
            EquilibriumKind::MeanField => "mean_field",
        }
    }
}

/// Options shared by the matrix Riccati solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiOptions {
    /// Abort once the operator norm of the solution exceeds this value.
    pub blowup_ceiling: f64,
    /// Keep the full family `{Pⁱ(t)}` only up to this many players
    /// (it costs `n³` doubles per node).
    pub store_p_list_max_n: usize,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions {
            blowup_ceiling: 1e6,
            store_p_list_max_n: 32,
        }
    }
}

/// Time-indexed coefficients of one equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficients {
    OpenLoop {
        /// `Λ(t_k)`.
        lambda: Vec<DMatrix<f64>>,
    },
    ClosedLoop {
        /// `A(t_k)` with `A_ij = (Pⁱ)_ij`.
        feedback: Vec<DMatrix<f64>>,
        /// `[node][player]`, present for small `n` only.
        p_list: Option<Vec<Vec<DMatrix<f64>>>>,
    },
    Distributed {
        pi: Vec<f64>,
        /// `[node][player·d + coord]`.
        rho: Vec<Vec<f64>>,
        mu: Vec<Vec<f64>>,
        picard_iterations: usize,
        picard_delta: f64,
    },
    MeanField {
        pi: Vec<f64>,
        /// Decoupling gain: `ρ = η·μ̄`.
        eta: Vec<f64>,
        /// Weight of the population mean in the cost (row sum of `w`: 1, or
        /// 0 for the no-interaction network).
        coupling: f64,
        sigma0: f64,
        /// `[node][coord]`: the mean flow without common noise.
        mu_bar: Vec<Vec<f64>>,
        rho: Vec<Vec<f64>>,
        picard_iterations: usize,
        /// `sup |ρ − η μ̄|` between the Picard and decoupled solutions.
        decoupling_gap: f64,
    },
}

/// Coefficients of one equilibrium on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LQEquilibrium {
    pub kind: EquilibriumKind,
    pub grid: TimeGrid,
    pub n: usize,
    pub d: usize,
    pub coefficients: Coefficients,
}

impl LQEquilibrium {
    /// Linear feedback matrix at node `k` (`Λ` or `A`), if the equilibrium
    /// has one.
    pub fn feedback_matrix(&self, k: usize) -> Option<&DMatrix<f64>> {
        match &self.coefficients {
            Coefficients::OpenLoop { lambda } => Some(&lambda[k]),
            Coefficients::ClosedLoop { feedback, .. } => Some(&feedback[k]),
            _ => None,
        }
    }

    /// Gain `π(t_k)` of the decentralized equilibria.
    pub fn pi(&self) -> Option<&[f64]> {
        match &self.coefficients {
            Coefficients::Distributed { pi, .. } | Coefficients::MeanField { pi, .. } => Some(pi),
            _ => None,
        }
    }

    pub fn lambda(&self) -> Option<&[DMatrix<f64>]> {
        match &self.coefficients {
            Coefficients::OpenLoop { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// Feedback `−α` of every player at node `k` as an `n×n` matrix acting on
    /// each coordinate, plus the per-player affine offsets (`[player·d +
    /// coord]`) of the decentralized equilibria. Mean-field offsets refer to
    /// the flow without common noise.
    pub fn affine_feedback(&self, k: usize) -> (DMatrix<f64>, Vec<f64>) {
        let (n, d) = (self.n, self.d);
        match &self.coefficients {
            Coefficients::OpenLoop { lambda } => (lambda[k].clone(), vec![0.0; n * d]),
            Coefficients::ClosedLoop { feedback, .. } => (feedback[k].clone(), vec![0.0; n * d]),
            Coefficients::Distributed { pi, rho, .. } => (DMatrix::identity(n, n) * pi[k], rho[k].clone()),
            Coefficients::MeanField { pi, rho, .. } => {
                let mut off = vec![0.0; n * d];
                for i in 0..n {
                    off[i * d..(i + 1) * d].copy_from_slice(&rho[k]);
                }
                (DMatrix::identity(n, n) * pi[k], off)
            }
        }
    }
}

pub(crate) fn lq_coefficients(game: &GameSpec) -> Result<LqCoefficients> {
    game.model
        .lq_coefficients()
        .ok_or_else(|| GameError::Unsupported(format!("Riccati solvers need an lq_network model, got {}", game.model.tag())))
}

pub(crate) fn check_grid(game: &GameSpec, grid: &TimeGrid) -> Result<()> {
    if grid.t0 != game.grid.t0 || grid.horizon != game.grid.horizon {
        return Err(GameError::DimensionMismatch(format!(
            "grid [{}, {}] does not match the game horizon [{}, {}]",
            grid.t0, grid.horizon, game.grid.t0, game.grid.horizon
        )));
    }
    Ok(())
}

/// Aborts on NaN or on an operator norm above the ceiling (the Frobenius
/// norm is checked first; it dominates the operator norm).
pub(crate) fn blowup_check(m: &DMatrix<f64>, ceiling: f64, time: f64) -> Result<()> {
    let fro = m.norm();
    if !fro.is_finite() {
        return Err(GameError::BlowUp { time, norm: f64::INFINITY });
    }
    if fro > ceiling {
        let op = crate::linalg::op_norm(m);
        if op > ceiling {
            return Err(GameError::BlowUp { time, norm: op });
        }
    }
    Ok(())
}
