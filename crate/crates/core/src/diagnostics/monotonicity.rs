use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::default_box_radius;
use crate::error::{GameError, Result};
use crate::game::{lq_gradient_matrix, CostModel, GameSpec, PhiKind, WeightMatrix};
use crate::linalg::{op_norm, sym, sym_min_eig};

/// How the constants were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityMethod {
    /// Eigensolver on the constant LQ matrices.
    ExactEigen,
    /// Rayleigh maximization over sampled Jacobians: a lower bound on the sup.
    Sampled,
}

/// Semi-monotonicity and regularity constants of a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub c_f_disp: f64,
    pub c_g_disp: f64,
    pub c_f_ll: f64,
    pub c_g_ll: f64,
    /// Convexity constant of the Lagrangian.
    pub c_l: f64,
    /// `c_l − (T²/2)·c_f_disp − T·c_g_disp`.
    pub c_disp: f64,
    pub c_df_lip: f64,
    pub c_dg_lip: f64,
    pub displacement_monotone: bool,
    pub method: MonotonicityMethod,
    pub horizon: f64,
}

/// Sampling controls for the Rayleigh estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityOptions {
    pub n_samples: usize,
    pub power_iters: usize,
    pub seed: u64,
    /// Half-width of the sampling box; defaults to [`default_box_radius`].
    pub box_radius: Option<f64>,
    /// Use the sampled method even when the exact one is available.
    pub force_sampled: bool,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        MonotonicityOptions { n_samples: 256, power_iters: 20, seed: 0, box_radius: None, force_sampled: false }
    }
}

/// Displacement semi-monotonicity constants with default options.
pub fn displacement_report(game: &GameSpec) -> Result<MonotonicityReport> {
    displacement_report_with(game, &MonotonicityOptions::default())
}

pub fn displacement_report_with(game: &GameSpec, opts: &MonotonicityOptions) -> Result<MonotonicityReport> {
    monotonicity(game, opts)
}

/// Lasry–Lions semi-monotonicity constants with default options.
pub fn lasry_lions_report(game: &GameSpec) -> Result<MonotonicityReport> {
    lasry_lions_report_with(game, &MonotonicityOptions::default())
}

pub fn lasry_lions_report_with(game: &GameSpec, opts: &MonotonicityOptions) -> Result<MonotonicityReport> {
    monotonicity(game, opts)
}

/// Both reports share one computation; each fills every field.
fn monotonicity(game: &GameSpec, opts: &MonotonicityOptions) -> Result<MonotonicityReport> {
    let horizon = game.horizon();
    let c_l = game.hamiltonian().convexity_floor();
    let w = &game.weights;
    let (c_f_disp, c_g_disp, c_f_ll, c_g_ll, c_df_lip, c_dg_lip, method) = match &game.model {
        CostModel::LqNetwork { a_f, a_g, q_f, q_g } if !opts.force_sampled => {
            let mf = lq_gradient_matrix(*a_f, *q_f, w);
            let mg = lq_gradient_matrix(*a_g, *q_g, w);
            let ll = |a: f64| neg_part(sym_min_eig(&(w.matrix() * (-a))));
            (
                neg_part(sym_min_eig(&mf)),
                neg_part(sym_min_eig(&mg)),
                ll(*a_f),
                ll(*a_g),
                op_norm(&mf),
                op_norm(&mg),
                MonotonicityMethod::ExactEigen,
            )
        }
        CostModel::LqNetwork { .. } | CostModel::PhiNetwork { .. } => {
            let radius = match opts.box_radius {
                Some(r) if r > 0.0 && r.is_finite() => r,
                Some(r) => return Err(GameError::config(format!("box radius {r} must be positive"))),
                None => default_box_radius(game),
            };
            let f = sampled_constants(game, false, radius, opts);
            let g = sampled_constants(game, true, radius, opts);
            (f.disp, g.disp, f.ll, g.ll, f.lip, g.lip, MonotonicityMethod::Sampled)
        }
        CostModel::Custom(_) => {
            return Err(GameError::Unsupported(
                "monotonicity constants for custom models: evaluate the Jacobians of the supplied \
                 gradient evaluators with a sampled checker"
                    .into(),
            ))
        }
    };
    let c_disp = c_l - 0.5 * horizon * horizon * c_f_disp - horizon * c_g_disp;
    Ok(MonotonicityReport {
        c_f_disp,
        c_g_disp,
        c_f_ll,
        c_g_ll,
        c_l,
        c_disp,
        c_df_lip,
        c_dg_lip,
        displacement_monotone: c_disp > 0.0,
        method,
        horizon,
    })
}

fn neg_part(lambda_min: f64) -> f64 {
    (-lambda_min).max(0.0)
}

struct Sampled {
    disp: f64,
    ll: f64,
    lip: f64,
}

/// Jacobians of the diagonal gradient field and of its off-diagonal part
/// at a point (per coordinate for LQ, `d = 1` for the bounded-map model).
fn jacobians(model: &CostModel, w: &WeightMatrix, terminal: bool, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    match *model {
        CostModel::LqNetwork { a_f, a_g, q_f, q_g } => {
            let (a, q) = if terminal { (a_g, q_g) } else { (a_f, q_f) };
            (lq_gradient_matrix(a, q, w), w.matrix() * (-a))
        }
        CostModel::PhiNetwork { a, phi } => phi_jacobians(a, phi, w, x),
        CostModel::Custom(_) => unreachable!("custom models are rejected before sampling"),
    }
}

/// `M = A diag(φ'²) − A diag(φ') w diag(φ') + A diag(r φ'')` with
/// `r_i = φ(x_i) − Σ_k w_ik φ(x_k)`; the off-diagonal part keeps only the
/// middle term.
fn phi_jacobians(a: f64, phi: PhiKind, w: &WeightMatrix, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = w.n();
    let val: Vec<f64> = x.iter().map(|&v| phi.eval(v)).collect();
    let d1: Vec<f64> = x.iter().map(|&v| phi.d1(v)).collect();
    let mut off = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off[(i, j)] = -a * d1[i] * w.get(i, j) * d1[j];
            }
        }
    }
    let mut full = off.clone();
    for i in 0..n {
        let r = val[i] - (0..n).map(|k| w.get(i, k) * val[k]).sum::<f64>();
        full[(i, i)] = a * d1[i] * d1[i] + a * r * phi.d2(x[i]) - a * d1[i] * w.get(i, i) * d1[i];
    }
    (full, off)
}

fn sampled_constants(game: &GameSpec, terminal: bool, radius: f64, opts: &MonotonicityOptions) -> Sampled {
    // LQ Jacobians are constant per coordinate; the bounded-map model has d = 1.
    let n = game.n;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Sampled { disp: 0.0, ll: 0.0, lip: 0.0 };
    let mut x = vec![0.0; n];
    for _ in 0..opts.n_samples.max(1) {
        for v in x.iter_mut() {
            *v = rng.random_range(-radius..=radius);
        }
        let (full, off) = jacobians(&game.model, &game.weights, terminal, &x);
        let start = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        out.disp = out.disp.max(neg_part(rayleigh_min(&sym(&full), &start, opts.power_iters)));
        out.ll = out.ll.max(neg_part(rayleigh_min(&sym(&off), &start, opts.power_iters)));
        out.lip = out.lip.max(op_norm(&full));
    }
    out
}

/// Rayleigh quotient after power iteration on `s·I − m`, where `s` is a
/// Gershgorin bound; the result is never below `λ_min(m)`.
fn rayleigh_min(m: &DMatrix<f64>, start: &DVector<f64>, iters: usize) -> f64 {
    let n = m.nrows();
    let shift = (0..n)
        .map(|i| m[(i, i)] + (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut v = start.clone();
    if v.norm() == 0.0 {
        v = DVector::from_element(n, 1.0);
    }
    v /= v.norm();
    for _ in 0..iters {
        let next = &v * shift - m * &v;
        let norm = next.norm();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        v = next / norm;
    }
    v.dot(&(m * &v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, build_weight_matrix, InitialLaw, TimeGrid, WeightKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn game(model: CostModel, kind: WeightKind, n: usize, horizon: f64) -> GameSpec {
        let w = build_weight_matrix(&kind, n, 1).unwrap();
        let d = 1;
        build_game(model, w, n, d, TimeGrid::new(0.0, horizon, 10).unwrap(), 0.5, 0.0, InitialLaw::standard_gaussian(d))
            .unwrap()
    }

    #[test]
    fn complete_three_is_displacement_flat() {
        let g = game(CostModel::lq(1.0, 0.0, 0.0, 0.0), WeightKind::Complete, 3, 1.0);
        let r = displacement_report(&g).unwrap();
        assert_abs_diff_eq!(r.c_f_disp, 0.0, epsilon = 1e-12);
        assert_eq!(r.method, MonotonicityMethod::ExactEigen);
        assert_eq!(r.c_l, 1.0);
        assert!(r.displacement_monotone);
    }

    #[test]
    fn zero_weights_identity_cost() {
        let g = game(CostModel::lq(0.0, 0.0, 1.0, 0.0), WeightKind::Zero, 4, 1.0);
        let r = displacement_report(&g).unwrap();
        assert_eq!(r.c_f_disp, 0.0);
        assert_abs_diff_eq!(r.c_df_lip, 1.0, epsilon = 1e-12);
        assert_eq!(r.c_f_ll, 0.0);
        assert_eq!(r.c_g_ll, 0.0);
    }

    #[test]
    fn lasry_lions_signs() {
        let g = game(CostModel::lq(-1.0, 0.0, 0.0, 0.0), WeightKind::Complete, 3, 1.0);
        assert_abs_diff_eq!(lasry_lions_report(&g).unwrap().c_f_ll, 0.5, epsilon = 1e-12);
        let g = game(CostModel::lq(1.0, 0.0, 0.0, 0.0), WeightKind::CirculantKRegular { k: 2 }, 6, 1.0);
        assert_abs_diff_eq!(lasry_lions_report(&g).unwrap().c_f_ll, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_coupling_breaks_displacement() {
        let g = game(CostModel::lq(-4.0, 0.0, 0.0, 0.0), WeightKind::Complete, 3, 2.0);
        let r = displacement_report(&g).unwrap();
        // Sym(−4(I − w)) has λ_min = −6 on the complete graph of size 3.
        assert_abs_diff_eq!(r.c_f_disp, 6.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.c_disp, 1.0 - 2.0 * 6.0, epsilon = 1e-10);
        assert!(!r.displacement_monotone);
    }

    #[test]
    fn custom_is_unsupported() {
        use crate::game::{CostEvaluator, CustomModel, QuadraticHamiltonian};
        use std::sync::Arc;
        #[derive(Debug)]
        struct Zero;
        impl CostEvaluator for Zero {
            fn running(&self, _i: usize, _x: &[f64]) -> f64 {
                0.0
            }
            fn terminal(&self, _i: usize, _x: &[f64]) -> f64 {
                0.0
            }
            fn running_gradient(&self, _i: usize, _j: usize, _x: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
            fn terminal_gradient(&self, _i: usize, _j: usize, _x: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
        }
        let model = CostModel::Custom(CustomModel { costs: Arc::new(Zero), hamiltonian: Arc::new(QuadraticHamiltonian) });
        let g = game(model, WeightKind::Complete, 3, 1.0);
        assert!(matches!(displacement_report(&g), Err(GameError::Unsupported(_))));
    }

    #[test]
    fn sampled_phi_is_finite_and_bounded() {
        let g = game(CostModel::PhiNetwork { a: 1.0, phi: PhiKind::Tanh }, WeightKind::Complete, 5, 1.0);
        let r = displacement_report(&g).unwrap();
        assert_eq!(r.method, MonotonicityMethod::Sampled);
        // |M| ≤ A(‖φ'‖² (1 + 1) + 2‖φ‖‖φ''‖) with ‖φ''‖ < 0.78 for tanh.
        assert!(r.c_df_lip <= 2.0 + 2.0 * 2.0 * 0.78);
        assert!(r.c_f_ll <= 1.0 + 1e-12);
        assert_eq!(r.c_f_disp, r.c_g_disp);
    }

    #[test]
    fn asymmetric_row_stochastic_can_lose_displacement() {
        // Everyone follows player 0: column sums are not 1 and Sym(w) has an
        // eigenvalue above 1.
        let w = WeightMatrix::from_row_major(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let m = lq_gradient_matrix(1.0, 0.0, &w);
        assert!(neg_part(sym_min_eig(&m)) > 0.1);
    }

    #[test]
    fn phi_jacobian_matches_finite_differences() {
        let w = build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p: 0.7 }, 5, 3).unwrap();
        let model = CostModel::PhiNetwork { a: 1.3, phi: PhiKind::ScaledArctan { scale: 0.8 } };
        let x = [0.3, -1.1, 0.7, 2.0, -0.4];
        let (full, _) = jacobians(&model, &w, false, &x);
        let h = 1e-6;
        let mut g = [0.0];
        for i in 0..5 {
            for j in 0..5 {
                let mut xp = x;
                xp[j] += h;
                model.own_gradient(&w, 1, i, &xp, false, &mut g);
                let up = g[0];
                xp[j] -= 2.0 * h;
                model.own_gradient(&w, 1, i, &xp, false, &mut g);
                let fd = (up - g[0]) / (2.0 * h);
                assert_abs_diff_eq!(full[(i, j)], fd, epsilon = 1e-7);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn doubly_stochastic_weights_give_zero_disp(
            n in 3usize..32,
            shifts in proptest::collection::vec((1usize..31, 0.01f64..1.0), 1..4),
            perm_seed in 0u64..1000,
            a in 0.0f64..5.0,
        ) {
            // Convex combination of symmetric circulant shifts, relabelled.
            use rand::seq::SliceRandom;
            let total: f64 = shifts.iter().map(|s| s.1).sum();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
            let mut m = DMatrix::zeros(n, n);
            for &(s, c) in &shifts {
                let s = 1 + s % (n - 1);
                for i in 0..n {
                    m[(perm[i], perm[(i + s) % n])] += 0.5 * c / total;
                    m[(perm[i], perm[(i + n - s) % n])] += 0.5 * c / total;
                }
            }
            let w = WeightMatrix::new(m).unwrap();
            let mf = lq_gradient_matrix(a, 0.0, &w);
            prop_assert!(neg_part(sym_min_eig(&mf)) <= 1e-10 * (1.0 + a));
        }

        #[test]
        fn sampled_never_exceeds_exact(n in 2usize..12, a_f in -3.0f64..3.0, a_g in -3.0f64..3.0, seed in 0u64..100) {
            let w = build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p: 0.6 }, n, seed).unwrap();
            let g = build_game(CostModel::lq(a_f, a_g, 0.3, 0.1), w, n, 1, TimeGrid::new(0.0, 1.0, 4).unwrap(), 0.1, 0.0,
                InitialLaw::standard_gaussian(1)).unwrap();
            let exact = displacement_report(&g).unwrap();
            let opts = MonotonicityOptions { force_sampled: true, n_samples: 8, seed, ..Default::default() };
            let s = displacement_report_with(&g, &opts).unwrap();
            let tol = 1e-9;
            prop_assert!(s.c_f_disp <= exact.c_f_disp + tol);
            prop_assert!(s.c_g_disp <= exact.c_g_disp + tol);
            prop_assert!(s.c_f_ll <= exact.c_f_ll + tol);
            prop_assert!(s.c_g_ll <= exact.c_g_ll + tol);
            prop_assert!(s.c_df_lip <= exact.c_df_lip + tol);
        }

        #[test]
        fn scaling_covariance(c in 0.1f64..10.0, a in -2.0f64..2.0, q in 0.0f64..2.0, seed in 0u64..100) {
            let w = build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p: 0.5 }, 6, seed).unwrap();
            let mk = |s: f64| build_game(CostModel::lq(s * a, 0.0, s * q, 0.0), w.clone(), 6, 1,
                TimeGrid::new(0.0, 1.0, 4).unwrap(), 0.1, 0.0, InitialLaw::standard_gaussian(1)).unwrap();
            let r1 = displacement_report(&mk(1.0)).unwrap();
            let rc = displacement_report(&mk(c)).unwrap();
            prop_assert!((rc.c_f_disp - c * r1.c_f_disp).abs() <= 1e-9 * (1.0 + rc.c_f_disp));
            prop_assert!((rc.c_df_lip - c * r1.c_df_lip).abs() <= 1e-9 * (1.0 + rc.c_df_lip));
            let m1 = lq_gradient_matrix(a, q, &w);
            let mc = lq_gradient_matrix(c * a, c * q, &w);
            prop_assert!((mc - m1 * c).abs().max() <= 1e-12 * (1.0 + c));
        }
    }
}
