use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, NewtonOptions};
use crate::error::{GameError, Result};
use crate::game::{GameSpec, TimeGrid};
use crate::riccati::ode::rk4_step;

pub type ShootingOptions = NewtonOptions;

/// Deterministic open-loop equilibrium path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicSolution {
    pub grid: TimeGrid,
    /// `[node][player·d + coord]`.
    pub x_paths: Vec<Vec<f64>>,
    pub y_paths: Vec<Vec<f64>>,
    /// `max_i |Y_T^i − D_iG^i(X_T)|`.
    pub terminal_residual: f64,
    pub newton_iters: usize,
}

/// Right-hand side of the characteristics `Ẋⁱ = −D_pH(Xⁱ, Yⁱ)`,
/// `Ẏⁱ = D_xH(Xⁱ, Yⁱ) − D_iFⁱ(X)` on the stacked state `(X, Y)`.
pub(crate) fn characteristics(game: &GameSpec, z: &[f64]) -> Vec<f64> {
    let nd = game.n * game.d;
    let d = game.d;
    let (x, y) = z.split_at(nd);
    let ham = game.hamiltonian();
    let mut out = vec![0.0; 2 * nd];
    let mut buf = vec![0.0; d];
    for i in 0..game.n {
        let xi = &x[i * d..(i + 1) * d];
        let yi = &y[i * d..(i + 1) * d];
        ham.d_p(xi, yi, &mut buf);
        for c in 0..d {
            out[i * d + c] = -buf[c];
        }
        ham.d_x(xi, yi, &mut buf);
        let mut g = vec![0.0; d];
        game.model.own_gradient(&game.weights, d, i, x, false, &mut g);
        for c in 0..d {
            out[nd + i * d + c] = buf[c] - g[c];
        }
    }
    out
}

pub(crate) fn terminal_gap(game: &GameSpec, z: &[f64]) -> Vec<f64> {
    let nd = game.n * game.d;
    let d = game.d;
    let (x, y) = z.split_at(nd);
    let mut r = vec![0.0; nd];
    let mut g = vec![0.0; d];
    for i in 0..game.n {
        game.model.own_gradient(&game.weights, d, i, x, true, &mut g);
        for c in 0..d {
            r[i * d + c] = y[i * d + c] - g[c];
        }
    }
    r
}

fn integrate(game: &GameSpec, grid: &TimeGrid, x0: &[f64], y0: &[f64]) -> Vec<Vec<f64>> {
    let mut z: Vec<f64> = x0.iter().chain(y0).copied().collect();
    let mut path = Vec::with_capacity(grid.len());
    path.push(z.clone());
    for _ in 0..grid.n_steps {
        z = rk4_step(&z, grid.dt(), |s| characteristics(game, s));
        path.push(z.clone());
    }
    path
}

/// Newton shooting on `Y₀ ↦ Y_T − D_iGⁱ(X_T)` for the deterministic game
/// (`σ = σ₀ = 0`) started at `x0` (length `n·d`).
pub fn solve_pontryagin_shooting(game: &GameSpec, x0: &[f64], opts: &ShootingOptions) -> Result<DeterministicSolution> {
    if game.sigma != 0.0 || game.sigma0 != 0.0 {
        return Err(GameError::config("shooting solves the deterministic game; set sigma = sigma0 = 0"));
    }
    let nd = game.n * game.d;
    if x0.len() != nd {
        return Err(GameError::DimensionMismatch(format!("x0 has length {}, expected {nd}", x0.len())));
    }
    let grid = game.grid;
    let shoot = |y0: &[f64]| {
        let path = integrate(game, &grid, x0, y0);
        terminal_gap(game, path.last().expect("non-empty"))
    };
    // Terminal gradient at x0 is a reasonable first guess.
    let guess = terminal_gap(game, &x0.iter().copied().chain(std::iter::repeat_n(0.0, nd)).collect::<Vec<_>>())
        .iter()
        .map(|g| -g)
        .collect::<Vec<_>>();
    let sol = newton_solve(&guess, shoot, opts, "shooting")?;
    let path = integrate(game, &grid, x0, &sol.x);
    let residual = terminal_gap(game, path.last().expect("non-empty"))
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let (x_paths, y_paths) = path.into_iter().map(|z| (z[..nd].to_vec(), z[nd..].to_vec())).unzip();
    Ok(DeterministicSolution {
        grid,
        x_paths,
        y_paths,
        terminal_residual: residual,
        newton_iters: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, build_weight_matrix, CostModel, InitialLaw, PhiKind, WeightKind, WeightMatrix};

    fn det_game(model: CostModel, w: WeightMatrix) -> GameSpec {
        let n = w.n();
        build_game(model, w, n, 1, TimeGrid::new(0.0, 1.0, 100).unwrap(), 0.0, 0.0, InitialLaw::point_mass(vec![0.0])).unwrap()
    }

    #[test]
    fn scalar_lq_costate() {
        let g = det_game(CostModel::lq(0.0, 0.0, 0.0, 1.0), WeightMatrix::zero(1));
        let s = solve_pontryagin_shooting(&g, &[1.0], &ShootingOptions::default()).unwrap();
        assert!((s.y_paths[0][0] - 0.5).abs() < 1e-8);
        assert!(s.terminal_residual < 1e-9);
    }

    #[test]
    fn zero_costs() {
        let w = build_weight_matrix(&WeightKind::Complete, 3, 0).unwrap();
        let g = det_game(CostModel::lq(0.0, 0.0, 0.0, 0.0), w);
        let s = solve_pontryagin_shooting(&g, &[0.3, -1.0, 2.0], &ShootingOptions::default()).unwrap();
        for (x, y) in s.x_paths.iter().zip(&s.y_paths) {
            assert_eq!(x, &vec![0.3, -1.0, 2.0]);
            assert!(y.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn odd_symmetric_phi_network() {
        let w = build_weight_matrix(&WeightKind::Complete, 3, 0).unwrap();
        let g = det_game(CostModel::PhiNetwork { a: 1.0, phi: PhiKind::Tanh }, w);
        let s = solve_pontryagin_shooting(&g, &[-1.0, 0.0, 1.0], &ShootingOptions::default()).unwrap();
        assert!(s.terminal_residual < 1e-9);
        for x in &s.x_paths {
            assert!((x[0] + x[2]).abs() < 1e-10, "{x:?}");
            assert!(x[1].abs() < 1e-10);
        }
    }

    #[test]
    fn noisy_game_rejected() {
        let mut g = det_game(CostModel::lq(0.0, 0.0, 0.0, 1.0), WeightMatrix::zero(1));
        g.sigma = 0.5;
        assert!(matches!(solve_pontryagin_shooting(&g, &[1.0], &ShootingOptions::default()), Err(GameError::Config(_))));
    }
}
