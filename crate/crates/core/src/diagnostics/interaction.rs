use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{lq_player_hessian, CostModel, GameSpec};

/// Where the gradient-based quantities `δ^i` were evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum MetricDomain {
    /// Global sup (analytic envelope for bounded-gradient models).
    Exact,
    /// Sup restricted to the box `[-box_radius, box_radius]^{Nd}`; gradients
    /// of quadratic costs are unbounded, so this is a flagged under-estimate
    /// of the global sup.
    BoxSup { box_radius: f64, n_samples: usize },
}

/// Interaction strengths `δ^i`, `κ^i`, `κ̃^i` and the weak-interaction
/// left-hand sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionMetrics {
    pub delta_i: Vec<f64>,
    pub kappa_i: Vec<f64>,
    pub kappa_tilde_i: Vec<f64>,
    pub delta: f64,
    pub kappa: f64,
    pub kappa_tilde: f64,
    /// `δ · Σ_i δ^i`.
    pub weak1: f64,
    /// `κ · κ̃`.
    pub weak2: f64,
    pub domain: MetricDomain,
    /// Largest value of `Σ_{j≠i} |D_{x^j} F^i|² + |D_{x^j} G^i|²` seen at
    /// uniform samples of the box; never above `delta_i`.
    pub delta_sampled_i: Vec<f64>,
}

/// Interaction strengths of an LQ or bounded-map network game.
///
/// `box_radius` is required for LQ costs, whose gradients are unbounded; the
/// bounded-map model uses it only for the sampled cross-check (with a unit box
/// when absent).
pub fn interaction_metrics(
    game: &GameSpec,
    box_radius: Option<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<InteractionMetrics> {
    if let Some(r) = box_radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(GameError::config(format!("box radius {r} must be positive")));
        }
    }
    let n = game.n;
    let d = game.d;
    let w = &game.weights;
    let row_sq = |i: usize| (0..n).filter(|&j| j != i).map(|j| w.get(i, j).powi(2)).sum::<f64>();
    let col_sq = |i: usize| (0..n).filter(|&j| j != i).map(|j| w.get(j, i).powi(2)).sum::<f64>();
    // |1 − w_ii| + Σ_{k≠i} |w_ik|: sup of |x_i − Σ_k w_ik x_k| per unit box.
    let spread = |i: usize| (1.0 - w.get(i, i)).abs() + (0..n).filter(|&k| k != i).map(|k| w.get(i, k).abs()).sum::<f64>();

    let (delta_i, kappa_i, kappa_tilde_i, domain, radius) = match game.model {
        CostModel::LqNetwork { a_f, a_g, q_f, q_g } => {
            let r = box_radius.ok_or_else(|| {
                GameError::config("interaction metrics of LQ costs need a box radius (gradients are unbounded)")
            })?;
            let hf: Vec<_> = (0..n).map(|i| lq_player_hessian(a_f, q_f, w, i)).collect();
            let hg: Vec<_> = (0..n).map(|i| lq_player_hessian(a_g, q_g, w, i)).collect();
            // Isotropic blocks: the operator norm of s·I_d is |s|.
            let kappa: Vec<f64> = (0..n)
                .map(|i| (0..n).filter(|&j| j != i).map(|j| hf[i][(j, i)].powi(2) + hg[i][(j, i)].powi(2)).sum())
                .collect();
            let kappa_t: Vec<f64> = (0..n)
                .map(|i| (0..n).filter(|&j| j != i).map(|j| hf[j][(i, j)].powi(2) + hg[j][(i, j)].powi(2)).sum())
                .collect();
            let delta: Vec<f64> = (0..n)
                .map(|i| (a_f * a_f + a_g * a_g) * row_sq(i) * d as f64 * (r * spread(i)).powi(2))
                .collect();
            (delta, kappa, kappa_t, MetricDomain::BoxSup { box_radius: r, n_samples }, r)
        }
        CostModel::PhiNetwork { a, phi } => {
            let b = phi.bounds();
            // Running and terminal costs coincide, hence the factors 2.
            let delta: Vec<f64> =
                (0..n).map(|i| 2.0 * (a.abs() * b.sup * spread(i) * b.sup_d1).powi(2) * row_sq(i)).collect();
            // φ' peaks at the origin, so sup |A w_ij φ'(x_i) φ'(x_j)| = |A w_ij| ‖φ'‖².
            let k4 = 2.0 * a * a * b.sup_d1.powi(4);
            let kappa: Vec<f64> = (0..n).map(|i| k4 * row_sq(i)).collect();
            let kappa_t: Vec<f64> = (0..n).map(|i| k4 * col_sq(i)).collect();
            (delta, kappa, kappa_t, MetricDomain::Exact, box_radius.unwrap_or(1.0))
        }
        CostModel::Custom(_) => {
            return Err(GameError::Unsupported("interaction metrics for custom models".into()));
        }
    };

    let delta_sampled_i = sampled_delta(game, radius, n_samples, seed);
    let max = |v: &[f64]| v.iter().copied().fold(0.0_f64, f64::max);
    let delta = max(&delta_i);
    let kappa = max(&kappa_i);
    let kappa_tilde = max(&kappa_tilde_i);
    Ok(InteractionMetrics {
        weak1: delta * delta_i.iter().sum::<f64>(),
        weak2: kappa * kappa_tilde,
        delta,
        kappa,
        kappa_tilde,
        delta_i,
        kappa_i,
        kappa_tilde_i,
        domain,
        delta_sampled_i,
    })
}

/// Max over uniform box samples of `Σ_{j≠i} |D_{x^j} F^i|² + |D_{x^j} G^i|²`.
fn sampled_delta(game: &GameSpec, radius: f64, n_samples: usize, seed: u64) -> Vec<f64> {
    let n = game.n;
    let d = game.d;
    let w = &game.weights;
    let samples: Vec<Vec<f64>> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_samples).map(|_| (0..n * d).map(|_| rng.random_range(-radius..=radius)).collect()).collect()
    };
    samples
        .par_iter()
        .map(|x| {
            (0..n)
                .map(|i| match game.model {
                    CostModel::LqNetwork { a_f, a_g, .. } => {
                        let mut res = 0.0;
                        for k in 0..d {
                            let avg: f64 = (0..n).map(|l| w.get(i, l) * x[l * d + k]).sum();
                            res += (x[i * d + k] - avg).powi(2);
                        }
                        let wsq: f64 = (0..n).filter(|&j| j != i).map(|j| w.get(i, j).powi(2)).sum();
                        (a_f * a_f + a_g * a_g) * res * wsq
                    }
                    CostModel::PhiNetwork { a, phi } => {
                        let r = crate::game::model::phi_residual(phi, w, i, x);
                        let s: f64 = (0..n)
                            .filter(|&j| j != i)
                            .map(|j| (w.get(i, j) * phi.d1(x[j])).powi(2))
                            .sum();
                        2.0 * a * a * r * r * s
                    }
                    CostModel::Custom(_) => 0.0,
                })
                .collect::<Vec<f64>>()
        })
        .reduce(
            || vec![0.0; n],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, build_weight_matrix, InitialLaw, PhiKind, TimeGrid, WeightKind};
    use approx::assert_abs_diff_eq;

    fn game(model: CostModel, kind: WeightKind, n: usize) -> GameSpec {
        let w = build_weight_matrix(&kind, n, 2).unwrap();
        build_game(model, w, n, 1, TimeGrid::new(0.0, 1.0, 10).unwrap(), 0.5, 0.0, InitialLaw::standard_gaussian(1))
            .unwrap()
    }

    #[test]
    fn lq_complete_four_kappa() {
        let g = game(CostModel::lq(1.0, 1.0, 0.0, 0.0), WeightKind::Complete, 4);
        let m = interaction_metrics(&g, Some(3.0), 64, 0).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(m.kappa_i[i], 2.0 / 3.0, epsilon = 1e-14);
            assert_abs_diff_eq!(m.kappa_tilde_i[i], 2.0 / 3.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(m.weak2, 4.0 / 9.0, epsilon = 1e-14);
        // δ^i = (1 + 1)·(1/3)·9·(1 + 1)².
        assert_abs_diff_eq!(m.delta, 24.0, epsilon = 1e-12);
        assert!(matches!(m.domain, MetricDomain::BoxSup { .. }));
        for (s, e) in m.delta_sampled_i.iter().zip(&m.delta_i) {
            assert!(s <= e && *s > 0.0);
        }
    }

    #[test]
    fn zero_weights_vanish() {
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), WeightKind::Zero, 5);
        let m = interaction_metrics(&g, Some(2.0), 16, 0).unwrap();
        assert_eq!((m.delta, m.kappa, m.kappa_tilde, m.weak1, m.weak2), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn lq_requires_box() {
        let g = game(CostModel::lq(1.0, 1.0, 0.0, 0.0), WeightKind::Complete, 4);
        assert!(matches!(interaction_metrics(&g, None, 16, 0), Err(GameError::Config(_))));
        assert!(interaction_metrics(&g, Some(-1.0), 16, 0).is_err());
    }

    #[test]
    fn phi_envelope_and_sampled() {
        let g = game(CostModel::PhiNetwork { a: 1.0, phi: PhiKind::Tanh }, WeightKind::Complete, 5);
        let m = interaction_metrics(&g, Some(4.0), 512, 7).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(m.delta_i[i], 2.0, epsilon = 1e-12);
            assert!(m.delta_sampled_i[i] <= m.delta_i[i]);
            assert_abs_diff_eq!(m.kappa_i[i], 2.0 * 4.0 / 16.0, epsilon = 1e-14);
        }
        assert_eq!(m.domain, MetricDomain::Exact);
    }

    #[test]
    fn phi_kappa_tilde_uses_columns() {
        let w = crate::game::WeightMatrix::from_row_major(3, &[0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0]).unwrap();
        let g = build_game(CostModel::PhiNetwork { a: 2.0, phi: PhiKind::Tanh }, w, 3, 1,
            TimeGrid::new(0.0, 1.0, 4).unwrap(), 0.1, 0.0, InitialLaw::standard_gaussian(1)).unwrap();
        let m = interaction_metrics(&g, None, 8, 0).unwrap();
        // Column 1 carries weights {1, 1}.
        assert_abs_diff_eq!(m.kappa_tilde_i[1], 2.0 * 4.0 * 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.kappa_i[1], 2.0 * 4.0 * 0.5, epsilon = 1e-12);
    }
}
