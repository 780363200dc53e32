use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::{fit_column, FitOutcome, Table};
use crate::diagnostics::{default_box_radius, interaction_metrics};
use crate::error::{GameError, Result};
use crate::game::{sample_noise, NoiseFingerprint};
use crate::measures::poincare_constant;
use crate::riccati::{
    simulate, solve_closed_loop_lq, solve_distributed_lq, solve_mfg_lq, solve_open_loop_lq, GapStat, Member,
    PicardOptions, SimulationOptions,
};

/// One sweep point of the equilibrium-gap experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    /// `E[sup_t |X^CL − X^OL|²]` over all players.
    pub cl_ol_full: GapStat,
    /// `cl_ol_full / N`.
    pub cl_ol_per_player: GapStat,
    pub ol_dist_full: Option<GapStat>,
    pub ol_dist_per_player: Option<GapStat>,
    pub ol_mfg_full: GapStat,
    pub ol_mfg_per_player: GapStat,
    /// `σ⁻¹ δ Σ_i δ^i` with box-restricted `δ`.
    pub theory_cl_ol: f64,
    /// `(1 + max C_P) Σ_i κ^i`.
    pub theory_dist: f64,
    pub max_poincare: f64,
    pub noise: NoiseFingerprint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// Log-log fits of each gap column against `N`.
    pub fits: BTreeMap<String, FitOutcome>,
}

impl GapReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "gap",
            &[
                "N",
                "cl_ol_full",
                "cl_ol_full_se",
                "cl_ol_per_player",
                "cl_ol_per_player_se",
                "ol_dist_full",
                "ol_dist_full_se",
                "ol_dist_per_player",
                "ol_dist_per_player_se",
                "ol_mfg_full",
                "ol_mfg_full_se",
                "ol_mfg_per_player",
                "ol_mfg_per_player_se",
                "theory_cl_ol",
                "theory_dist",
                "max_poincare",
                "noise_checksum",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                r.n.into(),
                r.cl_ol_full.mean.into(),
                r.cl_ol_full.std_error.into(),
                r.cl_ol_per_player.mean.into(),
                r.cl_ol_per_player.std_error.into(),
                r.ol_dist_full.map(|g| g.mean).into(),
                r.ol_dist_full.map(|g| g.std_error).into(),
                r.ol_dist_per_player.map(|g| g.mean).into(),
                r.ol_dist_per_player.map(|g| g.std_error).into(),
                r.ol_mfg_full.mean.into(),
                r.ol_mfg_full.std_error.into(),
                r.ol_mfg_per_player.mean.into(),
                r.ol_mfg_per_player.std_error.into(),
                r.theory_cl_ol.into(),
                r.theory_dist.into(),
                r.max_poincare.into(),
                r.noise.checksum.clone().into(),
            ]);
        }
        t
    }
}

fn gap_row(config: &ExperimentConfig, n: usize) -> Result<GapRow> {
    let template = config.template()?;
    let game = template.instantiate(n, config.seed)?;
    if game.model.lq_coefficients().is_none() {
        return Err(GameError::Unsupported("the gap sweep needs an lq_network model".into()));
    }
    if game.sigma <= 0.0 {
        return Err(GameError::config("the gap sweep needs sigma > 0"));
    }
    if config.include_distributed && game.sigma0 > 0.0 {
        return Err(GameError::config(
            "the distributed column needs sigma0 = 0 (set include_distributed = false to run with common noise)",
        ));
    }
    let grid = game.grid;
    let cl = solve_closed_loop_lq(&game, &grid)?;
    let ol = solve_open_loop_lq(&game, &grid)?;
    let mfg = solve_mfg_lq(&game, &grid)?;
    let dist = if config.include_distributed { Some(solve_distributed_lq(&game, &grid, &PicardOptions::default())?) } else { None };

    let mut members = vec![Member::new(&cl), Member::new(&ol), Member::new(&mfg)];
    if let Some(d) = &dist {
        members.push(Member::new(d));
    }
    let noise = sample_noise(&game, config.n_paths, config.seed)?;
    let bundle = simulate(&members, &game, &noise, &SimulationOptions::default())?;
    let pair = |b: &str| bundle.gap("open_loop", b).cloned().expect("member present");
    let cl_ol = pair("closed_loop");
    let ol_mfg = pair("mean_field");
    let ol_dist = dist.as_ref().map(|_| pair("distributed"));

    let metrics = interaction_metrics(&game, Some(default_box_radius(&game)), config.check.n_samples, config.seed)?;
    let max_poincare = poincare_constant(&game.initial_law)?;
    Ok(GapRow {
        n,
        cl_ol_full: cl_ol.full,
        cl_ol_per_player: cl_ol.per_player_avg,
        ol_dist_full: ol_dist.as_ref().map(|g| g.full),
        ol_dist_per_player: ol_dist.as_ref().map(|g| g.per_player_avg),
        ol_mfg_full: ol_mfg.full,
        ol_mfg_per_player: ol_mfg.per_player_avg,
        theory_cl_ol: metrics.weak1 / game.sigma,
        theory_dist: (1.0 + max_poincare) * metrics.kappa_i.iter().sum::<f64>(),
        max_poincare,
        noise: bundle.noise,
    })
}

/// Closed-loop, open-loop, distributed and mean-field equilibria per `N` on
/// one shared noise bundle, with log-log fits of every gap column.
pub fn run_gap_sweep(config: &ExperimentConfig) -> Result<GapReport> {
    let sizes = config.sweep_sizes()?;
    let rows = sizes
        .par_iter()
        .map(|&n| gap_row(config, n).map_err(|e| e.at_size(n)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let mut fits = BTreeMap::new();
    let mut add = |name: &str, ys: Vec<f64>| {
        fits.insert(name.to_string(), fit_column(&xs, &ys));
    };
    add("cl_ol_full", rows.iter().map(|r| r.cl_ol_full.mean).collect());
    add("cl_ol_per_player", rows.iter().map(|r| r.cl_ol_per_player.mean).collect());
    add("ol_mfg_per_player", rows.iter().map(|r| r.ol_mfg_per_player.mean).collect());
    if config.include_distributed {
        add("ol_dist_full", rows.iter().map(|r| r.ol_dist_full.map_or(0.0, |g| g.mean)).collect());
        add("ol_dist_per_player", rows.iter().map(|r| r.ol_dist_per_player.map_or(0.0, |g| g.mean)).collect());
    }
    add("theory_cl_ol", rows.iter().map(|r| r.theory_cl_ol).collect());
    add("theory_dist", rows.iter().map(|r| r.theory_dist).collect());
    Ok(GapReport { rows, fits })
}
