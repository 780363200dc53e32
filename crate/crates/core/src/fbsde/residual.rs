use serde::{Deserialize, Serialize};

use super::lsmc::ApproxSolution;
use super::shooting::{characteristics, terminal_gap, DeterministicSolution};
use crate::game::GameSpec;

/// Discretization residuals of a forward-backward solution, per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub terminal: Vec<f64>,
    /// Largest backward residual over players on each step `[t_k, t_{k+1}]`.
    pub backward_by_step: Vec<f64>,
}

impl ResidualReport {
    pub fn max_forward(&self) -> f64 {
        self.forward.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_backward(&self) -> f64 {
        self.backward.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_terminal(&self) -> f64 {
        self.terminal.iter().copied().fold(0.0, f64::max)
    }
}

/// Trapezoidal residuals `(X_{k+1} − X_k)/Δt − ½(Ẋ_k + Ẋ_{k+1})` and the
/// analogue for `Y`, plus the terminal mismatch.
pub fn fbsde_residual(sol: &DeterministicSolution, game: &GameSpec) -> ResidualReport {
    let (n, d) = (game.n, game.d);
    let nd = n * d;
    let dt = sol.grid.dt();
    let rhs: Vec<Vec<f64>> = sol
        .x_paths
        .iter()
        .zip(&sol.y_paths)
        .map(|(x, y)| characteristics(game, &x.iter().chain(y).copied().collect::<Vec<_>>()))
        .collect();
    let mut forward = vec![0.0_f64; n];
    let mut backward = vec![0.0_f64; n];
    let mut by_step = Vec::with_capacity(sol.grid.n_steps);
    for k in 0..sol.grid.n_steps {
        let mut step_max = 0.0_f64;
        for idx in 0..nd {
            let i = idx / d;
            let fx = (sol.x_paths[k + 1][idx] - sol.x_paths[k][idx]) / dt - 0.5 * (rhs[k][idx] + rhs[k + 1][idx]);
            let fy = (sol.y_paths[k + 1][idx] - sol.y_paths[k][idx]) / dt - 0.5 * (rhs[k][nd + idx] + rhs[k + 1][nd + idx]);
            forward[i] = forward[i].max(fx.abs());
            backward[i] = backward[i].max(fy.abs());
            step_max = step_max.max(fy.abs());
        }
        by_step.push(step_max);
    }
    let last = sol.grid.n_steps;
    let z: Vec<f64> = sol.x_paths[last].iter().chain(&sol.y_paths[last]).copied().collect();
    let gap = terminal_gap(game, &z);
    let terminal = (0..n)
        .map(|i| gap[i * d..(i + 1) * d].iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .collect();
    ResidualReport {
        forward,
        backward,
        terminal,
        backward_by_step: by_step,
    }
}

/// Sample-based residuals of an LSMC solution: RMS of the Euler forward
/// residual (noise removed), the path-averaged backward drift residual, and
/// the RMS terminal mismatch.
pub fn lsmc_residual(sol: &ApproxSolution, game: &GameSpec) -> ResidualReport {
    let (n, d) = (game.n, game.d);
    let nd = n * d;
    let dt = sol.grid.dt();
    let paths = sol.n_paths();
    let noise = &sol.noise;
    let sig = (2.0 * game.sigma).sqrt();
    let sig0 = (2.0 * game.sigma0).sqrt();
    let mut forward = vec![0.0_f64; n];
    let mut backward = vec![0.0_f64; n];
    let mut by_step = Vec::with_capacity(sol.grid.n_steps);
    for k in 0..sol.grid.n_steps {
        let mut fsq = vec![0.0; nd];
        let mut bmean = vec![0.0; nd];
        for p in 0..paths {
            let x = &sol.x_samples[k][p];
            let y = &sol.y_samples[k][p];
            let z: Vec<f64> = x.iter().chain(y).copied().collect();
            let rhs = characteristics(game, &z);
            let dw = noise.idiosyncratic(p, k);
            let dw0 = noise.common(p, k);
            for idx in 0..nd {
                let c = idx % d;
                let dx = sol.x_samples[k + 1][p][idx] - x[idx] - sig * dw[idx] - sig0 * dw0[c];
                fsq[idx] += (dx / dt - sol.feedback_samples[k][p][idx]).powi(2);
                bmean[idx] += (sol.y_samples[k + 1][p][idx] - y[idx]) / dt - rhs[nd + idx];
            }
        }
        let mut step_max = 0.0_f64;
        for idx in 0..nd {
            let i = idx / d;
            forward[i] = forward[i].max((fsq[idx] / paths as f64).sqrt());
            let b = (bmean[idx] / paths as f64).abs();
            backward[i] = backward[i].max(b);
            step_max = step_max.max(b);
        }
        by_step.push(step_max);
    }
    let last = sol.grid.n_steps;
    let mut tsq = vec![0.0; n];
    for p in 0..paths {
        let z: Vec<f64> = sol.x_samples[last][p].iter().chain(&sol.y_samples[last][p]).copied().collect();
        let gap = terminal_gap(game, &z);
        for idx in 0..nd {
            tsq[idx / d] += gap[idx] * gap[idx];
        }
    }
    ResidualReport {
        forward,
        backward,
        terminal: tsq.iter().map(|s| (s / paths as f64).sqrt()).collect(),
        backward_by_step: by_step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbsde::{solve_pontryagin_shooting, ShootingOptions};
    use crate::game::{build_game, build_weight_matrix, CostModel, InitialLaw, TimeGrid, WeightKind};

    fn solved() -> (GameSpec, DeterministicSolution) {
        let w = build_weight_matrix(&WeightKind::Complete, 3, 0).unwrap();
        let g = build_game(CostModel::lq(1.0, 1.0, 1.0, 1.0), w, 3, 1, TimeGrid::new(0.0, 1.0, 100).unwrap(), 0.0, 0.0, InitialLaw::point_mass(vec![0.0])).unwrap();
        let s = solve_pontryagin_shooting(&g, &[1.0, -0.5, 0.2], &ShootingOptions::default()).unwrap();
        (g, s)
    }

    #[test]
    fn shooting_residuals_are_small() {
        let (g, s) = solved();
        let r = fbsde_residual(&s, &g);
        assert!(r.max_terminal() < 1e-9);
        // Trapezoid vs RK4 consistency is second order in Δt.
        assert!(r.max_forward() < 1e-3 && r.max_backward() < 1e-3);
    }

    #[test]
    fn corrupted_costate_is_detected() {
        let (g, mut s) = solved();
        s.y_paths[40][1] += 0.1;
        let r = fbsde_residual(&s, &g);
        let dt = s.grid.dt();
        assert!(r.backward_by_step[39] >= 0.09 / dt);
        assert!(r.backward_by_step[40] >= 0.09 / dt);
    }
}
