use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::output::{Cell, Table};
use crate::error::{GameError, Result};
use crate::fbsde::{fbsde_residual, solve_pontryagin_shooting, NewtonOptions};
use crate::game::{sample_noise, CostModelDoc, NoiseBundle};
use crate::riccati::{
    equilibrium_to_json, feedback_diagnostics, simulate, solve_closed_loop_lq, solve_distributed_lq, solve_mfg_lq,
    solve_open_loop_lq, trajectories_to_csv, EquilibriumKind, LQEquilibrium, Member, PicardOptions, SimulationOptions,
};

/// Files produced by `solve`.
#[derive(Clone, Debug)]
pub struct SolveOutput {
    /// `(file name, JSON)` per equilibrium.
    pub equilibria: Vec<(String, Value)>,
    pub tables: Vec<Table>,
    /// Raw CSV files (trajectories).
    pub csv_files: Vec<(String, String)>,
    pub summary: Value,
}

fn default_kinds(config: &ExperimentConfig, n: usize, sigma0: f64) -> Vec<EquilibriumKind> {
    let mut kinds = Vec::new();
    if n <= config.closed_loop_max_n {
        kinds.push(EquilibriumKind::ClosedLoop);
    }
    kinds.push(EquilibriumKind::OpenLoop);
    if sigma0 == 0.0 {
        kinds.push(EquilibriumKind::Distributed);
    }
    kinds.push(EquilibriumKind::MeanField);
    kinds
}

fn solve_lq(config: &ExperimentConfig) -> Result<SolveOutput> {
    let game = config.template()?.single(config.seed)?;
    let grid = game.grid;
    let kinds = if config.solve.equilibria.is_empty() {
        default_kinds(config, game.n, game.sigma0)
    } else {
        config.solve.equilibria.clone()
    };
    let mut eqs: Vec<LQEquilibrium> = Vec::new();
    for kind in &kinds {
        let eq = match kind {
            EquilibriumKind::ClosedLoop => solve_closed_loop_lq(&game, &grid)?,
            EquilibriumKind::OpenLoop => solve_open_loop_lq(&game, &grid)?,
            EquilibriumKind::Distributed => solve_distributed_lq(&game, &grid, &PicardOptions::default())?,
            EquilibriumKind::MeanField => solve_mfg_lq(&game, &grid)?,
        };
        if !eqs.iter().any(|e| e.kind == eq.kind) {
            eqs.push(eq);
        }
    }
    let equilibria = eqs.iter().map(|e| (format!("{}.json", e.kind.as_str()), equilibrium_to_json(e))).collect();

    let members: Vec<Member> = eqs.iter().map(Member::new).collect();
    let noise = sample_noise(&game, config.n_paths, config.seed)?;
    let opts = SimulationOptions { record_paths: config.solve.record_paths.min(config.n_paths) };
    let bundle = simulate(&members, &game, &noise, &opts)?;

    let mut gaps = Table::new(
        "gaps",
        &[
            "pair",
            "full",
            "full_se",
            "per_player_avg",
            "per_player_avg_se",
            "player_mean",
            "player_mean_se",
            "player_max",
            "player_max_se",
        ],
    );
    for g in &bundle.gaps {
        gaps.push(vec![
            g.label.clone().into(),
            g.full.mean.into(),
            g.full.std_error.into(),
            g.per_player_avg.mean.into(),
            g.per_player_avg.std_error.into(),
            g.player_mean.mean.into(),
            g.player_mean.std_error.into(),
            g.player_max.mean.into(),
            g.player_max.std_error.into(),
        ]);
    }
    let mut costs = Table::new("costs", &["member", "player", "cost", "cost_se"]);
    for (m, info) in bundle.members.iter().enumerate() {
        for (i, c) in bundle.costs[m].iter().enumerate() {
            costs.push(vec![info.label.clone().into(), i.into(), c.mean.into(), c.std_error.into()]);
        }
    }
    let mut tables = vec![gaps, costs];

    let ol = eqs.iter().find(|e| e.kind == EquilibriumKind::OpenLoop);
    let cl = eqs.iter().find(|e| e.kind == EquilibriumKind::ClosedLoop);
    if let (Some(ol), Some(cl)) = (ol, cl) {
        let prof = feedback_diagnostics(ol, cl)?;
        let mut t = Table::new("feedback", &["time", "lambda_op", "a_op", "diff_op"]);
        for k in 0..prof.times.len() {
            t.push(vec![prof.times[k].into(), prof.lambda_op[k].into(), prof.a_op[k].into(), prof.diff_op[k].into()]);
        }
        tables.push(t);
    }
    let mut csv_files = Vec::new();
    if opts.record_paths > 0 {
        csv_files.push(("trajectories.csv".to_string(), trajectories_to_csv(&bundle)?));
    }
    let summary = json!({
        "equilibria": eqs.iter().map(|e| e.kind.as_str()).collect::<Vec<_>>(),
        "noise": bundle.noise,
        "gaps": bundle.gaps,
    });
    Ok(SolveOutput { equilibria, tables, csv_files, summary })
}

fn solve_deterministic(config: &ExperimentConfig) -> Result<SolveOutput> {
    let game = config.template()?.single(config.seed)?;
    if game.sigma != 0.0 || game.sigma0 != 0.0 {
        return Err(GameError::Unsupported(
            "solve for the bounded-map model runs the deterministic shooting solver (sigma = sigma0 = 0)".into(),
        ));
    }
    let (n, d) = (game.n, game.d);
    let draws = NoiseBundle::generate(n, d, game.grid, 1, config.seed)?;
    let mut x0 = vec![0.0; n * d];
    for i in 0..n {
        game.initial_law.draw_into(i, &draws.init_normals(0)[i * d..(i + 1) * d], draws.init_uniforms(0)[i], &mut x0[i * d..(i + 1) * d]);
    }
    let sol = solve_pontryagin_shooting(&game, &x0, &NewtonOptions::default())?;
    let residual = fbsde_residual(&sol, &game);
    let mut header = vec!["step".to_string(), "time".to_string(), "player".to_string()];
    header.extend((0..d).map(|c| format!("x{c}")));
    header.extend((0..d).map(|c| format!("y{c}")));
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new("trajectories", &header_ref);
    for (k, (x, y)) in sol.x_paths.iter().zip(&sol.y_paths).enumerate() {
        for i in 0..n {
            let mut row: Vec<Cell> = vec![k.into(), game.grid.time(k).into(), i.into()];
            row.extend((0..d).map(|c| Cell::from(x[i * d + c])));
            row.extend((0..d).map(|c| Cell::from(y[i * d + c])));
            t.push(row);
        }
    }
    let summary = json!({
        "solver": "shooting",
        "terminal_residual": sol.terminal_residual,
        "newton_iters": sol.newton_iters,
        "max_forward_residual": residual.max_forward(),
        "max_backward_residual": residual.max_backward(),
    });
    Ok(SolveOutput { equilibria: vec![("open_loop.json".into(), serde_json::to_value(&sol)?)], tables: vec![t], csv_files: vec![], summary })
}

/// Solves the template at its own size and simulates the equilibria on shared
/// noise.
pub fn run_solve(config: &ExperimentConfig) -> Result<SolveOutput> {
    match config.template()?.model {
        CostModelDoc::LqNetwork { .. } => solve_lq(config),
        CostModelDoc::PhiNetwork { .. } => solve_deterministic(config),
    }
}
