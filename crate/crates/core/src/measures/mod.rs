//! Discrete measures, exact Wasserstein distances, rate functions and the
//! weighted empirical-measure experiment.

mod discrete;
mod fg;
mod poincare;
mod rates;
mod transport;

pub use discrete::{wasserstein_1d, DiscreteMeasure};
pub use fg::{
    fg_rate_experiment, FgComponent, FgConfig, FgResult, FgRow, ProfileKind, WeightProfile, MIN_GRID_POINTS,
    MIN_MC_REPS,
};
pub use poincare::poincare_constant;
pub use rates::{fit_loglog, rho_rate, rho_rate_full, RateFit};
pub use transport::{wasserstein_discrete, wasserstein_discrete_with, COST_SCALE, MAX_ATOMS};
