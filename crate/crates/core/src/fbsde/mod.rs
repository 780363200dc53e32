//! Forward-backward solvers: deterministic Newton shooting on the Pontryagin
//! characteristics, an approximate LSMC-Picard scheme for `σ > 0`, and a
//! particle McKean–Vlasov solver for the mean-field limit.

mod lsmc;
mod mkv;
mod newton;
mod residual;
mod shooting;

pub use lsmc::{solve_pontryagin_picard_lsmc, ApproxSolution, LsmcOptions};
pub use mkv::{solve_mkv_deterministic, MkvOptions, MkvSolution, ParticlePath};
pub use newton::{newton_solve, NewtonOptions, NewtonResult};
pub use residual::{fbsde_residual, lsmc_residual, ResidualReport};
pub use shooting::{solve_pontryagin_shooting, DeterministicSolution, ShootingOptions};
