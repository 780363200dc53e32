use nalgebra::DMatrix;
use rayon::prelude::*;

use super::ode::rk4_step;
use super::{blowup_check, check_grid, lq_coefficients, Coefficients, EquilibriumKind, LQEquilibrium, RiccatiOptions};
use crate::error::Result;
use crate::game::model::lq_player_hessian;
use crate::game::{GameSpec, TimeGrid};

/// Coupled Nash Riccati system for `{Pⁱ}` and its feedback `A_ij = (Pⁱ)_ij`.
pub fn solve_closed_loop_lq(game: &GameSpec, grid: &TimeGrid) -> Result<LQEquilibrium> {
    solve_closed_loop_lq_with(game, grid, &RiccatiOptions::default())
}

/// Right-hand side written as `QPⁱ + (QPⁱ)ᵀ − pⁱpⁱᵀ − Sⁱ_F`, where the columns
/// of `Q` are `qʲ = Pʲe_j`; the `j = i` term of the sum is folded into `QPⁱ`.
fn rhs(p: &Vec<DMatrix<f64>>, s_f: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = p.len();
    let q = DMatrix::from_fn(n, n, |r, j| p[j][(r, j)]);
    p.par_iter()
        .zip(s_f.par_iter())
        .enumerate()
        .map(|(i, (pi, si))| {
            let qp = &q * pi;
            let col = pi.column(i);
            let mut out = &qp + qp.transpose() - si;
            out.ger(-1.0, &col, &col, 1.0);
            out
        })
        .collect()
}

fn feedback_of(p: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| p[i][(i, j)])
}

pub fn solve_closed_loop_lq_with(game: &GameSpec, grid: &TimeGrid, opts: &RiccatiOptions) -> Result<LQEquilibrium> {
    let c = lq_coefficients(game)?;
    check_grid(game, grid)?;
    let n = game.n;
    let s_f: Vec<_> = (0..n).map(|i| lq_player_hessian(c.a_f, c.q_f, &game.weights, i)).collect();
    let mut p: Vec<_> = (0..n).map(|i| lq_player_hessian(c.a_g, c.q_g, &game.weights, i)).collect();
    let keep = n <= opts.store_p_list_max_n;
    let mut feedback = Vec::with_capacity(grid.len());
    let mut p_list = Vec::new();
    feedback.push(feedback_of(&p));
    if keep {
        p_list.push(p.clone());
    }
    let dt = grid.dt();
    for k in (0..grid.n_steps).rev() {
        p = rk4_step(&p, -dt, |y| rhs(y, &s_f));
        for m in p.iter_mut() {
            let t = m.transpose();
            *m += t;
            *m *= 0.5;
            blowup_check(m, opts.blowup_ceiling, grid.time(k))?;
        }
        feedback.push(feedback_of(&p));
        if keep {
            p_list.push(p.clone());
        }
    }
    feedback.reverse();
    p_list.reverse();
    Ok(LQEquilibrium {
        kind: EquilibriumKind::ClosedLoop,
        grid: *grid,
        n,
        d: game.d,
        coefficients: Coefficients::ClosedLoop {
            feedback,
            p_list: keep.then_some(p_list),
        },
    })
}
