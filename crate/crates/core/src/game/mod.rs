//! Game instances and the shared sampling infrastructure.

pub mod grid;
pub mod hamiltonian;
pub mod law;
pub mod model;
pub mod noise;
pub mod spec;
pub mod weights;

pub use grid::TimeGrid;
pub use hamiltonian::{legendre_residual, ActionGrid, Hamiltonian, QuadraticHamiltonian};
pub use law::{InitialLaw, LawComponent};
pub use model::{
    lq_gradient_matrix, lq_player_hessian, CostEvaluator, CostModel, CostModelDoc, CustomModel, LqCoefficients, PhiBounds,
    PhiKind,
};
pub use noise::{sample_noise, NoiseBundle, NoiseFingerprint};
pub use spec::{build_game, GameSpec, GameSpecDoc};
pub use weights::{build_weight_matrix, WeightKind, WeightMatrix};
