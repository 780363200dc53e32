use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::ExperimentConfig;
use super::output::{fit_column, Cell, FitOutcome, Table};
use crate::diagnostics::graph_stats;
use crate::error::{GameError, Result};
use crate::fbsde::{solve_mkv_deterministic, solve_pontryagin_shooting, MkvOptions, NewtonOptions};
use crate::game::{sample_noise, CostModelDoc, GameSpec, InitialLaw, LawComponent, NoiseBundle, NoiseFingerprint};
use crate::measures::rho_rate;
use crate::riccati::{simulate, solve_closed_loop_lq, solve_mfg_lq, solve_open_loop_lq, GapStat, Member, SimulationOptions};

/// Particles of the mean-field reference cloud in the deterministic mode.
pub const REFERENCE_CLOUD: usize = 256;

/// How `sup_i E[sup_t |X̃^{N,i} − X̄^i|²]` is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupEstimator {
    /// Vertex-transitive graph and exchangeable law: all players are equal in
    /// law, so the player average is an unbiased estimate of the sup.
    PlayerMean,
    /// Largest per-player mean.
    PlayerMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityRow {
    pub n: usize,
    /// `E[sup_t |X^N − X̃^N|²]`: closed loop vs open loop (LQ only, small `N`).
    pub cl_ol_full: Option<GapStat>,
    /// `|w|²_Fr · max_i |w_i·|²`.
    pub theory_univ1: f64,
    pub ol_mfg_player_mean: GapStat,
    pub ol_mfg_player_max: GapStat,
    /// The value used for the sup over players.
    pub ol_mfg_sup: GapStat,
    /// `(1/N) Σ_i ρ_d(|w_i·|⁻²)` with the single class `{1..N}`.
    pub theory_univ2: f64,
    pub max_col_l1: f64,
    pub noise: Option<NoiseFingerprint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub estimator: SupEstimator,
    /// `lq` (coupled Riccati simulation) or `deterministic` (shooting vs the
    /// particle mean-field solver).
    pub mode: String,
    pub rows: Vec<UniversalityRow>,
    pub fits: BTreeMap<String, FitOutcome>,
    pub warnings: Vec<String>,
}

impl UniversalityReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "universality",
            &[
                "N",
                "cl_ol_full",
                "cl_ol_full_se",
                "theory_univ1",
                "ol_mfg_player_mean",
                "ol_mfg_player_mean_se",
                "ol_mfg_player_max",
                "ol_mfg_player_max_se",
                "ol_mfg_sup",
                "theory_univ2",
                "max_col_l1",
                "noise_checksum",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                r.n.into(),
                r.cl_ol_full.map(|g| g.mean).into(),
                r.cl_ol_full.map(|g| g.std_error).into(),
                r.theory_univ1.into(),
                r.ol_mfg_player_mean.mean.into(),
                r.ol_mfg_player_mean.std_error.into(),
                r.ol_mfg_player_max.mean.into(),
                r.ol_mfg_player_max.std_error.into(),
                r.ol_mfg_sup.mean.into(),
                r.theory_univ2.into(),
                r.max_col_l1.into(),
                Cell::Text(r.noise.as_ref().map_or_else(|| "none".into(), |f| f.checksum.clone())),
            ]);
        }
        t
    }
}

/// `(1/N) Σ_i ρ_d(|w_i·|⁻²)`; players without neighbours contribute 0.
fn theory_univ2(game: &GameSpec) -> Result<f64> {
    let w = &game.weights;
    let mut total = 0.0;
    for i in 0..game.n {
        let sq: f64 = (0..game.n).map(|j| w.get(i, j).powi(2)).sum();
        if sq > 0.0 {
            total += rho_rate(game.d, 1.0 / sq)?;
        }
    }
    Ok(total / game.n as f64)
}

fn lq_row(config: &ExperimentConfig, game: &GameSpec) -> Result<(Option<GapStat>, GapStat, GapStat, NoiseFingerprint)> {
    let grid = game.grid;
    let ol = solve_open_loop_lq(game, &grid)?;
    let mfg = solve_mfg_lq(game, &grid)?;
    let cl = if game.n <= config.closed_loop_max_n { Some(solve_closed_loop_lq(game, &grid)?) } else { None };
    let mut members = vec![Member::new(&ol), Member::new(&mfg)];
    if let Some(c) = &cl {
        members.push(Member::new(c));
    }
    let noise = sample_noise(game, config.n_paths, config.seed)?;
    let bundle = simulate(&members, game, &noise, &SimulationOptions::default())?;
    let mfg_gap = bundle.gap("open_loop", "mean_field").expect("member present");
    let cl_gap = cl.as_ref().map(|_| bundle.gap("open_loop", "closed_loop").expect("member present").full);
    Ok((cl_gap, mfg_gap.player_mean, mfg_gap.player_max, bundle.noise))
}

/// Deterministic reference cloud of the initial law: midpoint quantiles for
/// one-dimensional Gaussians, the support otherwise.
fn reference_cloud(law: &InitialLaw, d: usize) -> Result<Vec<Vec<f64>>> {
    let gaussian = |mean: &[f64], std: f64| -> Result<Vec<Vec<f64>>> {
        if std == 0.0 {
            return Ok(vec![mean.to_vec()]);
        }
        if d != 1 {
            return Err(GameError::Unsupported("deterministic universality with Gaussian starts needs d = 1".into()));
        }
        let normal = Normal::new(mean[0], std).map_err(|e| GameError::config(e.to_string()))?;
        Ok((0..REFERENCE_CLOUD)
            .map(|k| vec![normal.inverse_cdf((k as f64 + 0.5) / REFERENCE_CLOUD as f64)])
            .collect())
    };
    match law {
        InitialLaw::PointMass { location } => Ok(vec![location.clone()]),
        InitialLaw::Gaussian { mean, std } => gaussian(mean, *std),
        InitialLaw::Product { components } => match &components[0] {
            LawComponent::PointMass { location } => Ok(vec![location.clone()]),
            LawComponent::Gaussian { mean, std } => gaussian(mean, *std),
        },
        InitialLaw::Particles { points } => Ok(points.clone()),
    }
}

fn deterministic_row(config: &ExperimentConfig, game: &GameSpec) -> Result<(GapStat, GapStat)> {
    let (n, d) = (game.n, game.d);
    let draws = NoiseBundle::generate(n, d, game.grid, 1, config.seed)?;
    let mut x0 = vec![0.0; n * d];
    for i in 0..n {
        game.initial_law.draw_into(i, &draws.init_normals(0)[i * d..(i + 1) * d], draws.init_uniforms(0)[i], &mut x0[i * d..(i + 1) * d]);
    }
    let newton = NewtonOptions { tol: 1e-10, ..NewtonOptions::default() };
    let players = solve_pontryagin_shooting(game, &x0, &newton)?;
    let mkv = solve_mkv_deterministic(game, &reference_cloud(&game.initial_law, d)?, &MkvOptions::default())?;
    let per_player = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xs, _) = mkv.particle(game, &x0[i * d..(i + 1) * d], &newton)?;
            Ok(players
                .x_paths
                .iter()
                .zip(&xs)
                .map(|(xn, xb)| (0..d).map(|c| (xn[i * d + c] - xb[c]).powi(2)).sum::<f64>())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_player.iter().sum::<f64>() / n as f64;
    let max = per_player.iter().copied().fold(0.0, f64::max);
    Ok((GapStat { mean, std_error: 0.0 }, GapStat { mean: max, std_error: 0.0 }))
}

/// Open-loop network equilibrium against i.i.d. mean-field copies on coupled
/// noise, per `N`.
///
/// LQ templates run the Riccati solvers and the coupled simulation (plus the
/// closed-loop column up to `closed_loop_max_n`); bounded-map templates must
/// be deterministic and compare Newton shooting with the particle mean-field
/// solver.
pub fn run_universality_sweep(config: &ExperimentConfig) -> Result<UniversalityReport> {
    let sizes = config.sweep_sizes()?;
    let template = config.template()?;
    let lq = match template.model {
        CostModelDoc::LqNetwork { .. } => true,
        CostModelDoc::PhiNetwork { .. } => {
            if template.sigma != 0.0 || template.sigma0 != 0.0 {
                return Err(GameError::Unsupported(
                    "universality for the bounded-map model is computed in the deterministic case only (sigma = sigma0 = 0)".into(),
                ));
            }
            false
        }
    };
    if !template.initial_law.is_exchangeable() {
        return Err(GameError::config("the mean-field comparison needs an exchangeable initial law"));
    }
    let estimator = if template.graph.is_transitive() { SupEstimator::PlayerMean } else { SupEstimator::PlayerMax };

    let rows = sizes
        .par_iter()
        .map(|&n| {
            let build = || -> Result<UniversalityRow> {
                let game = template.instantiate(n, config.seed)?;
                let stats = graph_stats(&game.weights, None)?;
                let (cl_ol_full, pm, px, noise) = if lq {
                    let (cl, pm, px, fp) = lq_row(config, &game)?;
                    (cl, pm, px, Some(fp))
                } else {
                    let (pm, px) = deterministic_row(config, &game)?;
                    (None, pm, px, None)
                };
                Ok(UniversalityRow {
                    n,
                    cl_ol_full,
                    theory_univ1: stats.dd_product,
                    ol_mfg_player_mean: pm,
                    ol_mfg_player_max: px,
                    ol_mfg_sup: if estimator == SupEstimator::PlayerMean { pm } else { px },
                    theory_univ2: theory_univ2(&game)?,
                    max_col_l1: stats.max_col_l1,
                    noise,
                })
            };
            build().map_err(|e| e.at_size(n))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    if rows.windows(2).any(|w| w[1].theory_univ1 >= w[0].theory_univ1) {
        warnings.push(
            "|w|_Fr^2 * max_i |w_i|^2 is not decreasing on the N list: the degree-divergence hypothesis is unmet".to_string(),
        );
    }
    if rows.windows(2).any(|w| w[1].max_col_l1 > w[0].max_col_l1 * (1.0 + 1e-12)) {
        warnings.push("max column sum of w grows with N: the bounded-influence hypothesis is unmet".to_string());
    }

    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let mut fits = BTreeMap::new();
    fits.insert("ol_mfg_sup".into(), fit_column(&xs, &rows.iter().map(|r| r.ol_mfg_sup.mean).collect::<Vec<_>>()));
    fits.insert("theory_univ2".into(), fit_column(&xs, &rows.iter().map(|r| r.theory_univ2).collect::<Vec<_>>()));
    fits.insert("theory_univ1".into(), fit_column(&xs, &rows.iter().map(|r| r.theory_univ1).collect::<Vec<_>>()));
    let theory: Vec<f64> = rows.iter().map(|r| r.theory_univ2).collect();
    if theory.iter().all(|t| *t > 0.0) {
        fits.insert(
            "ol_mfg_sup_vs_theory_univ2".into(),
            fit_column(&theory, &rows.iter().map(|r| r.ol_mfg_sup.mean).collect::<Vec<_>>()),
        );
    }
    let cl: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.cl_ol_full.map(|g| (r.n as f64, g.mean))).collect();
    if lq {
        let (cx, cy): (Vec<f64>, Vec<f64>) = cl.into_iter().unzip();
        fits.insert("cl_ol_full".into(), fit_column(&cx, &cy));
    }
    Ok(UniversalityReport { estimator, mode: if lq { "lq" } else { "deterministic" }.into(), rows, fits, warnings })
}
