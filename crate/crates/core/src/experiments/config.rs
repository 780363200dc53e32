use serde::{Deserialize, Serialize};

use crate::diagnostics::ConditionThresholds;
use crate::error::{GameError, Result};
use crate::game::{build_game, build_weight_matrix, CostModelDoc, GameSpec, InitialLaw, TimeGrid, WeightKind, WeightMatrix};
use crate::measures::FgConfig;
use crate::riccati::EquilibriumKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Gap,
    Universality,
    Viscosity,
    Fgrate,
    Check,
    Solve,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Gap => "gap",
            ExperimentKind::Universality => "universality",
            ExperimentKind::Viscosity => "viscosity",
            ExperimentKind::Fgrate => "fgrate",
            ExperimentKind::Check => "check",
            ExperimentKind::Solve => "solve",
        }
    }
}

/// Interaction graph as a function of the player count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphRule {
    #[default]
    Complete,
    Zero,
    /// Circulant graph with either a fixed degree `k` or `k_N ≈ fraction·N`
    /// (rounded down to an even number, clamped to `[2, N − 1]`).
    Circulant {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        fraction: Option<f64>,
    },
    ErdosRenyi { p: f64 },
    /// Row-major entries for a single size.
    Explicit { entries: Vec<f64> },
}

impl GraphRule {
    pub fn build(&self, n: usize, seed: u64) -> Result<WeightMatrix> {
        let kind = match self {
            GraphRule::Complete => WeightKind::Complete,
            GraphRule::Zero => WeightKind::Zero,
            GraphRule::Circulant { k, fraction } => {
                let k = match (k, fraction) {
                    (Some(k), None) => *k,
                    (None, Some(f)) if *f > 0.0 && *f <= 1.0 => {
                        let raw = (f * n as f64).floor() as usize;
                        let even = raw - raw % 2;
                        let top = n.saturating_sub(1);
                        even.max(2).min(top - top % 2)
                    }
                    _ => {
                        return Err(GameError::config(
                            "circulant graph needs exactly one of k or fraction (in (0, 1])",
                        ))
                    }
                };
                WeightKind::CirculantKRegular { k }
            }
            GraphRule::ErdosRenyi { p } => WeightKind::ErdosRenyiNormalized { p: *p },
            GraphRule::Explicit { entries } => WeightKind::Explicit { entries: entries.clone() },
        };
        build_weight_matrix(&kind, n, seed)
    }

    /// Whether every player is equal in law for exchangeable initial data
    /// (vertex-transitive families).
    pub fn is_transitive(&self) -> bool {
        matches!(self, GraphRule::Complete | GraphRule::Zero | GraphRule::Circulant { .. })
    }
}

/// Game without a fixed size; sweeps instantiate it per `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTemplate {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub t0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
    pub sigma: f64,
    #[serde(default)]
    pub sigma0: f64,
    #[serde(default)]
    pub graph: GraphRule,
    pub model: CostModelDoc,
    pub initial_law: InitialLaw,
}

fn one() -> usize {
    1
}

impl GameTemplate {
    pub fn instantiate(&self, n: usize, seed: u64) -> Result<GameSpec> {
        let w = self.graph.build(n, seed)?;
        let grid = TimeGrid::new(self.t0, self.horizon, self.n_steps)?;
        build_game(self.model.clone().into(), w, n, self.d, grid, self.sigma, self.sigma0, self.initial_law.clone())
    }

    /// The template at its own size `n`.
    pub fn single(&self, seed: u64) -> Result<GameSpec> {
        let n = self.n.ok_or_else(|| GameError::config("game.n is required for this experiment"))?;
        self.instantiate(n, seed)
    }
}

/// `σ_N = c·N^{−β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaRule {
    #[serde(default = "unit")]
    pub c: f64,
    pub beta: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for SigmaRule {
    fn default() -> Self {
        SigmaRule { c: 1.0, beta: 0.25 }
    }
}

impl SigmaRule {
    pub fn sigma(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(-self.beta)
    }

    /// `σ_N → 0` with `σ_N √N → ∞` requires `0 < β < 1/2`.
    pub fn validate(&self, n_list: &[usize]) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(GameError::config(format!("sigma rule constant c = {} must be positive", self.c)));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(GameError::config(format!(
                "sigma rule beta = {} violates 0 < beta < 1/2: the joint limit needs sigma_N -> 0 and sigma_N * sqrt(N) -> infinity",
                self.beta
            )));
        }
        let growth: Vec<f64> = n_list.iter().map(|&n| self.sigma(n) * (n as f64).sqrt()).collect();
        if growth.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GameError::config("sigma_N * sqrt(N) is not increasing on the supplied N list"));
        }
        Ok(())
    }
}

/// Settings of the `check` experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSettings {
    /// Half-width of the box for gradient sups (default: derived from the law).
    #[serde(default)]
    pub box_radius: Option<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub thresholds: ConditionThresholds,
    #[serde(default)]
    pub partition: Option<Vec<Vec<usize>>>,
}

fn default_samples() -> usize {
    256
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings { box_radius: None, n_samples: default_samples(), thresholds: ConditionThresholds::default(), partition: None }
    }
}

/// Settings of the `solve` experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    /// Equilibria to compute (default: every applicable notion).
    #[serde(default)]
    pub equilibria: Vec<EquilibriumKind>,
    /// Number of sample paths written to `trajectories.csv`.
    #[serde(default)]
    pub record_paths: usize,
}

/// Optional pass/fail bounds on the headline fit of a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitExpectation {
    #[serde(default)]
    pub max_slope: Option<f64>,
    #[serde(default)]
    pub min_slope: Option<f64>,
    #[serde(default)]
    pub min_r2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub game: Option<GameTemplate>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub sigma_rule: Option<SigmaRule>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gap sweep: include the distributed equilibrium (needs `σ₀ = 0`).
    #[serde(default = "yes")]
    pub include_distributed: bool,
    /// Largest `N` at which the closed-loop Riccati system is solved.
    #[serde(default = "default_cl_max")]
    pub closed_loop_max_n: usize,
    #[serde(default)]
    pub fgrate: Option<FgConfig>,
    #[serde(default)]
    pub check: CheckSettings,
    #[serde(default)]
    pub solve: SolveSettings,
    #[serde(default)]
    pub expect: Option<FitExpectation>,
}

fn default_paths() -> usize {
    256
}

fn yes() -> bool {
    true
}

fn default_cl_max() -> usize {
    128
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn template(&self) -> Result<&GameTemplate> {
        self.game
            .as_ref()
            .ok_or_else(|| GameError::config(format!("the {} experiment needs a game template", self.experiment.as_str())))
    }

    /// `N` list for sweeps: strictly increasing, at least three sizes.
    pub fn sweep_sizes(&self) -> Result<&[usize]> {
        let l = &self.n_list;
        if l.len() < 3 {
            return Err(GameError::config(format!("n_list needs at least 3 sizes for a rate fit, got {}", l.len())));
        }
        if l[0] == 0 || l.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GameError::config("n_list must be strictly increasing positive sizes"));
        }
        Ok(l)
    }

    /// Applies command-line overrides.
    pub fn apply_overrides(&mut self, seed: Option<u64>, paths: Option<usize>, steps: Option<usize>) {
        if let Some(s) = seed {
            self.seed = s;
            if let Some(fg) = self.fgrate.as_mut() {
                fg.seed = s;
            }
        }
        if let Some(p) = paths {
            self.n_paths = p;
            if let Some(fg) = self.fgrate.as_mut() {
                fg.mc_reps = p;
            }
        }
        if let (Some(k), Some(g)) = (steps, self.game.as_mut()) {
            g.n_steps = k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circulant_fraction_rule() {
        let rule = GraphRule::Circulant { k: None, fraction: Some(0.5) };
        let w = rule.build(128, 0).unwrap();
        assert!((w.get(0, 1) - 1.0 / 64.0).abs() < 1e-15);
        let w = rule.build(5, 0).unwrap();
        assert!((w.get(0, 1) - 0.5).abs() < 1e-15);
        assert!(GraphRule::Circulant { k: Some(4), fraction: Some(0.5) }.build(8, 0).is_err());
    }

    #[test]
    fn sigma_rule_guard() {
        let sizes = [16, 64, 256];
        assert!(SigmaRule { c: 1.0, beta: 0.25 }.validate(&sizes).is_ok());
        assert!(SigmaRule { c: 1.0, beta: 0.5 }.validate(&sizes).is_err());
        assert!(SigmaRule { c: 1.0, beta: 0.7 }.validate(&sizes).is_err());
        assert!((SigmaRule::default().sigma(16) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweep_sizes_validation() {
        let mut c: ExperimentConfig = serde_json::from_value(serde_json::json!({"experiment": "gap", "n_list": [4, 8]})).unwrap();
        assert!(c.sweep_sizes().is_err());
        c.n_list = vec![4, 8, 8];
        assert!(c.sweep_sizes().is_err());
        c.n_list = vec![4, 8, 16];
        assert_eq!(c.sweep_sizes().unwrap(), &[4, 8, 16]);
        assert_eq!(c.n_paths, 256);
        assert!(c.include_distributed);
    }

    #[test]
    fn template_parses() {
        let t: GameTemplate = serde_json::from_value(serde_json::json!({
            "T": 1.0, "n_steps": 50, "sigma": 1.0,
            "model": {"tag": "lq_network", "a_f": 1.0, "a_g": 1.0, "q_f": 1.0, "q_g": 1.0},
            "initial_law": {"tag": "gaussian", "mean": [0.0], "std": 1.0}
        }))
        .unwrap();
        let g = t.instantiate(6, 0).unwrap();
        assert_eq!(g.n, 6);
        assert!((g.weights.get(0, 1) - 0.2).abs() < 1e-15);
        assert!(t.single(0).is_err());
    }
}
