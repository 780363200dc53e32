use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use super::hamiltonian::{Hamiltonian, QuadraticHamiltonian};
use super::law::InitialLaw;
use super::model::{CostModel, CostModelDoc, PhiBounds};
use super::weights::WeightMatrix;
use crate::error::{GameError, Result};

/// A validated N-player game instance.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub n: usize,
    pub d: usize,
    pub grid: TimeGrid,
    pub sigma: f64,
    pub sigma0: f64,
    pub weights: WeightMatrix,
    pub model: CostModel,
    pub initial_law: InitialLaw,
    /// Sup norms of `φ, φ', φ''` for the bounded-map model.
    pub phi_bounds: Option<PhiBounds>,
}

/// Flat JSON form of a [`GameSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpecDoc {
    pub n: usize,
    pub d: usize,
    pub t0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
    pub sigma: f64,
    pub sigma0: f64,
    /// Row-major `n×n` entries.
    pub weights: Vec<f64>,
    pub model: CostModelDoc,
    pub initial_law: InitialLaw,
}

/// Assembles and eagerly validates a game.
#[allow(clippy::too_many_arguments)]
pub fn build_game(
    model: CostModel,
    weights: WeightMatrix,
    n: usize,
    d: usize,
    grid: TimeGrid,
    sigma: f64,
    sigma0: f64,
    initial_law: InitialLaw,
) -> Result<GameSpec> {
    if n == 0 || d == 0 {
        return Err(GameError::config(format!("need n >= 1 and d >= 1, got n = {n}, d = {d}")));
    }
    if weights.n() != n {
        return Err(GameError::DimensionMismatch(format!(
            "weight matrix has size {}, game has n = {n}",
            weights.n()
        )));
    }
    for (name, v) in [("sigma", sigma), ("sigma0", sigma0)] {
        if !v.is_finite() {
            return Err(GameError::NonFinite(name.into()));
        }
        if v < 0.0 {
            return Err(GameError::config(format!("{name} = {v} must be >= 0")));
        }
    }
    model.validate(d)?;
    initial_law.validate(n, d)?;
    let phi_bounds = model.phi_bounds();
    Ok(GameSpec {
        n,
        d,
        grid,
        sigma,
        sigma0,
        weights,
        model,
        initial_law,
        phi_bounds,
    })
}

impl GameSpec {
    pub fn horizon(&self) -> f64 {
        self.grid.duration()
    }

    pub fn hamiltonian(&self) -> &dyn Hamiltonian {
        match &self.model {
            CostModel::Custom(c) => c.hamiltonian.as_ref(),
            _ => &QuadraticHamiltonian,
        }
    }

    /// Same game on a different grid.
    pub fn with_grid(&self, grid: TimeGrid) -> GameSpec {
        GameSpec { grid, ..self.clone() }
    }

    pub fn with_noise(&self, sigma: f64, sigma0: f64) -> Result<GameSpec> {
        build_game(
            self.model.clone(),
            self.weights.clone(),
            self.n,
            self.d,
            self.grid,
            sigma,
            sigma0,
            self.initial_law.clone(),
        )
    }

    pub fn to_doc(&self) -> Result<GameSpecDoc> {
        Ok(GameSpecDoc {
            n: self.n,
            d: self.d,
            t0: self.grid.t0,
            horizon: self.grid.horizon,
            n_steps: self.grid.n_steps,
            sigma: self.sigma,
            sigma0: self.sigma0,
            weights: self.weights.row_major(),
            model: CostModelDoc::try_from(&self.model)?,
            initial_law: self.initial_law.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc()?)?)
    }

    pub fn from_json(s: &str) -> Result<GameSpec> {
        let doc: GameSpecDoc = serde_json::from_str(s)?;
        doc.build()
    }
}

impl GameSpecDoc {
    pub fn build(&self) -> Result<GameSpec> {
        let weights = WeightMatrix::from_row_major(self.n, &self.weights)?;
        let grid = TimeGrid::new(self.t0, self.horizon, self.n_steps)?;
        build_game(
            self.model.clone().into(),
            weights,
            self.n,
            self.d,
            grid,
            self.sigma,
            self.sigma0,
            self.initial_law.clone(),
        )
    }
}
