use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Uniform partition of `[t0, T]` into `n_steps` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(GameError::config("time grid needs at least one step"));
        }
        if !(t0.is_finite() && horizon.is_finite()) || horizon <= t0 {
            return Err(GameError::config(format!("invalid horizon [{t0}, {horizon}]")));
        }
        Ok(TimeGrid { t0, horizon, n_steps })
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.t0) / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node `k`; the last node is exactly `T`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn duration(&self) -> f64 {
        self.horizon - self.t0
    }

    /// Same interval with `n_steps / factor` steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(GameError::config(format!(
                "cannot coarsen {} steps by {factor}",
                self.n_steps
            )));
        }
        TimeGrid::new(self.t0, self.horizon, self.n_steps / factor)
    }
}
