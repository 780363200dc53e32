use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SigmaRule};
use super::output::{fit_column, FitOutcome, Table};
use super::universality::SupEstimator;
use crate::diagnostics::is_monotone_decreasing;
use crate::error::{GameError, Result};
use crate::game::{sample_noise, CostModelDoc, NoiseFingerprint};
use crate::measures::rho_rate;
use crate::riccati::{simulate, solve_mfg_lq, solve_open_loop_lq, GapStat, Member, SimulationOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscosityRow {
    pub n: usize,
    pub sigma_n: f64,
    /// `ρ_d(N)`.
    pub rho: f64,
    /// `sup_i E[sup_t |X̃^{N,i} − X̄^i|²]` against the inviscid mean-field
    /// copies.
    pub gap: GapStat,
    pub gap_player_max: GapStat,
    pub noise: NoiseFingerprint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscosityReport {
    pub sigma_rule: SigmaRule,
    pub estimator: SupEstimator,
    pub rows: Vec<ViscosityRow>,
    /// Whether the gap decreases strictly along the `N` list.
    pub decreasing: bool,
    /// Fits of the gap against `N`, `ρ_d(N) + σ_N` and `σ_N`.
    pub fits: BTreeMap<String, FitOutcome>,
    pub warnings: Vec<String>,
}

impl ViscosityReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "viscosity",
            &["N", "sigma_n", "rho", "rho_plus_sigma", "gap", "gap_se", "gap_player_max", "gap_player_max_se", "noise_checksum"],
        );
        for r in &self.rows {
            t.push(vec![
                r.n.into(),
                r.sigma_n.into(),
                r.rho.into(),
                (r.rho + r.sigma_n).into(),
                r.gap.mean.into(),
                r.gap.std_error.into(),
                r.gap_player_max.mean.into(),
                r.gap_player_max.std_error.into(),
                r.noise.checksum.clone().into(),
            ]);
        }
        t
    }
}

/// Open-loop `N`-player equilibrium with idiosyncratic intensity `σ_N`
/// against mean-field copies driven without idiosyncratic noise, per `N`.
pub fn run_viscosity_sweep(config: &ExperimentConfig) -> Result<ViscosityReport> {
    let sizes = config.sweep_sizes()?;
    let rule = config.sigma_rule.unwrap_or_default();
    rule.validate(sizes)?;
    let template = config.template()?;
    if !matches!(template.model, CostModelDoc::LqNetwork { .. }) {
        return Err(GameError::Unsupported("the viscosity sweep needs an lq_network model".into()));
    }
    if !template.initial_law.is_exchangeable() {
        return Err(GameError::config("the mean-field comparison needs an exchangeable initial law"));
    }
    let estimator = if template.graph.is_transitive() { SupEstimator::PlayerMean } else { SupEstimator::PlayerMax };

    let rows = sizes
        .par_iter()
        .map(|&n| {
            let build = || -> Result<ViscosityRow> {
                let sigma_n = rule.sigma(n);
                let game = template.instantiate(n, config.seed)?.with_noise(sigma_n, template.sigma0)?;
                let grid = game.grid;
                let ol = solve_open_loop_lq(&game, &grid)?;
                let mfg = solve_mfg_lq(&game, &grid)?;
                let members = [Member::new(&ol), Member::new(&mfg).with_sigma(0.0)];
                let noise = sample_noise(&game, config.n_paths, config.seed)?;
                let bundle = simulate(&members, &game, &noise, &SimulationOptions::default())?;
                let g = bundle.gap("open_loop", "mean_field").expect("member present");
                Ok(ViscosityRow {
                    n,
                    sigma_n,
                    rho: rho_rate(game.d, n as f64)?,
                    gap: if estimator == SupEstimator::PlayerMean { g.player_mean } else { g.player_max },
                    gap_player_max: g.player_max,
                    noise: bundle.noise,
                })
            };
            build().map_err(|e| e.at_size(n))
        })
        .collect::<Result<Vec<_>>>()?;

    let gaps: Vec<f64> = rows.iter().map(|r| r.gap.mean).collect();
    let decreasing = is_monotone_decreasing(&gaps);
    let mut warnings = Vec::new();
    if !decreasing {
        warnings.push("the measured gap is not strictly decreasing in N".to_string());
    }
    let by = |f: &dyn Fn(&ViscosityRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let mut fits = BTreeMap::new();
    fits.insert("gap_vs_n".to_string(), fit_column(&by(&|r| r.n as f64), &gaps));
    fits.insert("gap_vs_rho_plus_sigma".to_string(), fit_column(&by(&|r| r.rho + r.sigma_n), &gaps));
    fits.insert("gap_vs_sigma".to_string(), fit_column(&by(&|r| r.sigma_n), &gaps));
    Ok(ViscosityReport { sigma_rule: rule, estimator, rows, decreasing, fits, warnings })
}
