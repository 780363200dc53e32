use super::ode::integrate_backward;
use super::{blowup_check, check_grid, lq_coefficients, Coefficients, EquilibriumKind, LQEquilibrium, RiccatiOptions};
use crate::error::Result;
use crate::game::model::lq_gradient_matrix;
use crate::game::{GameSpec, TimeGrid};

/// Stacked decoupling-field Riccati `Λ' = Λ² − M_F`, `Λ(T) = M_G`.
pub fn solve_open_loop_lq(game: &GameSpec, grid: &TimeGrid) -> Result<LQEquilibrium> {
    solve_open_loop_lq_with(game, grid, &RiccatiOptions::default())
}

pub fn solve_open_loop_lq_with(game: &GameSpec, grid: &TimeGrid, opts: &RiccatiOptions) -> Result<LQEquilibrium> {
    let c = lq_coefficients(game)?;
    check_grid(game, grid)?;
    let m_f = lq_gradient_matrix(c.a_f, c.q_f, &game.weights);
    let m_g = lq_gradient_matrix(c.a_g, c.q_g, &game.weights);
    let lambda = integrate_backward(
        m_g,
        grid.n_steps,
        grid.dt(),
        |l| l * l - &m_f,
        |k, l| blowup_check(l, opts.blowup_ceiling, grid.time(k)),
    )?;
    Ok(LQEquilibrium {
        kind: EquilibriumKind::OpenLoop,
        grid: *grid,
        n: game.n,
        d: game.d,
        coefficients: Coefficients::OpenLoop { lambda },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, build_weight_matrix, CostModel, InitialLaw, WeightKind, WeightMatrix};
    use crate::GameError;

    fn game(model: CostModel, w: WeightMatrix, steps: usize) -> GameSpec {
        let n = w.n();
        build_game(model, w, n, 1, TimeGrid::new(0.0, 1.0, steps).unwrap(), 1.0, 0.0, InitialLaw::point_mass(vec![0.0])).unwrap()
    }

    #[test]
    fn single_player_terminal_only() {
        let g = game(CostModel::lq(0.0, 0.0, 0.0, 1.0), WeightMatrix::zero(1), 100);
        let eq = solve_open_loop_lq(&g, &g.grid).unwrap();
        let l = eq.lambda().unwrap();
        assert!((l[0][(0, 0)] - 0.5).abs() < 1e-8);
        assert_eq!(l[100][(0, 0)], 1.0);
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let w = build_weight_matrix(&WeightKind::Complete, 3, 0).unwrap();
        let g = game(CostModel::lq(0.0, 0.0, 0.0, 0.0), w, 20);
        let eq = solve_open_loop_lq(&g, &g.grid).unwrap();
        assert!(eq.lambda().unwrap().iter().all(|m| m.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn fixed_point_of_scalar_riccati() {
        let g = game(CostModel::lq(0.0, 0.0, 1.0, 1.0), WeightMatrix::zero(4), 50);
        let eq = solve_open_loop_lq(&g, &g.grid).unwrap();
        for m in eq.lambda().unwrap() {
            assert!((m - nalgebra::DMatrix::identity(4, 4)).abs().max() < 1e-15);
        }
    }

    #[test]
    fn rk4_order() {
        let w = build_weight_matrix(&WeightKind::Complete, 3, 0).unwrap();
        let at = |steps: usize| {
            let g = game(CostModel::lq(1.0, 0.5, 0.3, 1.0), w.clone(), steps);
            solve_open_loop_lq(&g, &g.grid).unwrap().lambda().unwrap()[0].clone()
        };
        let reference = at(2048);
        let e1 = (at(8) - &reference).norm();
        let e2 = (at(16) - &reference).norm();
        assert!((12.0..20.0).contains(&(e1 / e2)), "ratio {}", e1 / e2);
    }

    #[test]
    fn blow_up_is_reported() {
        // λ' = λ² with λ(T) = −2 explodes at T − 1/2.
        let g = game(CostModel::lq(0.0, 0.0, 0.0, -2.0), WeightMatrix::zero(1), 1000);
        match solve_open_loop_lq(&g, &g.grid) {
            Err(GameError::BlowUp { time, .. }) => assert!((time - 0.5).abs() < 0.01, "time {time}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn non_lq_rejected() {
        let w = build_weight_matrix(&WeightKind::Complete, 3, 0).unwrap();
        let g = game(CostModel::PhiNetwork { a: 1.0, phi: crate::game::PhiKind::Tanh }, w, 10);
        assert!(matches!(solve_open_loop_lq(&g, &g.grid), Err(GameError::Unsupported(_))));
    }
}
