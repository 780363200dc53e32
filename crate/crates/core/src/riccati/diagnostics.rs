use serde::{Deserialize, Serialize};

use super::LQEquilibrium;
use crate::error::{GameError, Result};
use crate::linalg::op_norm;

/// Per-node size of the open- and closed-loop feedback fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackProfile {
    pub times: Vec<f64>,
    /// `|Λ(t)|_op`.
    pub lambda_op: Vec<f64>,
    /// `|A(t)|_op`.
    pub a_op: Vec<f64>,
    /// `|A(t) − Λ(t)|_op`.
    pub diff_op: Vec<f64>,
    /// `[node][player]`: `Σ_{j≠i} A_ij(t)²`.
    pub offdiag_energy: Vec<Vec<f64>>,
}

impl FeedbackProfile {
    pub fn max_lambda_op(&self) -> f64 {
        self.lambda_op.iter().copied().fold(0.0, f64::max)
    }
}

pub fn feedback_diagnostics(eq_ol: &LQEquilibrium, eq_cl: &LQEquilibrium) -> Result<FeedbackProfile> {
    if eq_ol.grid != eq_cl.grid || eq_ol.n != eq_cl.n {
        return Err(GameError::DimensionMismatch("open- and closed-loop solutions live on different grids".into()));
    }
    let lambda = eq_ol
        .lambda()
        .ok_or_else(|| GameError::config("first argument must be an open-loop equilibrium"))?;
    let n = eq_ol.n;
    let mut p = FeedbackProfile {
        times: eq_ol.grid.nodes(),
        lambda_op: Vec::new(),
        a_op: Vec::new(),
        diff_op: Vec::new(),
        offdiag_energy: Vec::new(),
    };
    for (k, l) in lambda.iter().enumerate() {
        let a = match (&eq_cl.coefficients, eq_cl.kind) {
            (super::Coefficients::ClosedLoop { feedback, .. }, _) => &feedback[k],
            _ => return Err(GameError::config("second argument must be a closed-loop equilibrium")),
        };
        p.lambda_op.push(op_norm(l));
        p.a_op.push(op_norm(a));
        p.diff_op.push(op_norm(&(a - l)));
        p.offdiag_energy
            .push((0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| a[(i, j)].powi(2)).sum()).collect());
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, CostModel, InitialLaw, TimeGrid, WeightMatrix};
    use crate::riccati::{solve_closed_loop_lq, solve_open_loop_lq};

    #[test]
    fn single_player_profile_is_analytic() {
        let g = build_game(
            CostModel::lq(0.0, 0.0, 0.0, 1.0),
            WeightMatrix::zero(1),
            1,
            1,
            TimeGrid::new(0.0, 1.0, 100).unwrap(),
            0.0,
            0.0,
            InitialLaw::point_mass(vec![0.0]),
        )
        .unwrap();
        let ol = solve_open_loop_lq(&g, &g.grid).unwrap();
        let cl = solve_closed_loop_lq(&g, &g.grid).unwrap();
        let p = feedback_diagnostics(&ol, &cl).unwrap();
        for (k, t) in p.times.iter().enumerate() {
            assert!((p.lambda_op[k] - 1.0 / (2.0 - t)).abs() < 1e-9);
            assert!(p.diff_op[k] < 1e-12);
        }
        assert!(p.lambda_op.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_weights_have_no_gap() {
        let g = build_game(
            CostModel::lq(1.0, 1.0, 1.0, 1.0),
            WeightMatrix::zero(4),
            4,
            1,
            TimeGrid::new(0.0, 1.0, 20).unwrap(),
            1.0,
            0.0,
            InitialLaw::point_mass(vec![0.0]),
        )
        .unwrap();
        let ol = solve_open_loop_lq(&g, &g.grid).unwrap();
        let cl = solve_closed_loop_lq(&g, &g.grid).unwrap();
        let p = feedback_diagnostics(&ol, &cl).unwrap();
        assert!(p.diff_op.iter().all(|&x| x == 0.0));
        assert!(p.offdiag_energy.iter().flatten().all(|&x| x == 0.0));
    }
}
