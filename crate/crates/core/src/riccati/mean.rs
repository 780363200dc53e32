use nalgebra::DMatrix;

use super::ode::{hermite_mid, integrate_backward};
use super::{check_grid, lq_coefficients, Coefficients, EquilibriumKind, LQEquilibrium};
use crate::error::{GameError, Result};
use crate::game::{GameSpec, TimeGrid};

/// Fixed-point iteration on the mean flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardOptions {
    /// Sup-norm tolerance on successive mean flows.
    pub tol: f64,
    pub max_iters: usize,
    /// Damping `θ ∈ (0, 1]`: `μ ← (1 − θ)μ + θ·T(μ)`.
    pub relaxation: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-10,
            max_iters: 500,
            relaxation: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanFieldOptions {
    pub picard: PicardOptions,
    /// Weight of the population mean in the limiting cost. Defaults to the
    /// row sum of the network (1, or 0 for the empty network).
    pub coupling: Option<f64>,
}

/// Scalar gain `π' = π² − (q_f + a_f)`, `π(T) = q_g + a_g`.
fn solve_pi(q: f64, qg: f64, grid: &TimeGrid) -> Vec<f64> {
    integrate_backward::<_, _, _, ()>(qg, grid.n_steps, grid.dt(), |p: &f64| p * p - q, |_, _| Ok(()))
        .expect("infallible")
}

/// Linear forward-backward mean system on `[node][player·d + coord]`:
/// `μ' = −(πμ + ρ)`, `ρ' = πρ + a_f·Cμ`, `ρ(T) = −a_g·Cμ(T)`, `μ(0) = μ0`.
struct MeanSystem<'a> {
    grid: &'a TimeGrid,
    pi: &'a [f64],
    pi_dot: Vec<f64>,
    coupling: &'a DMatrix<f64>,
    a_f: f64,
    a_g: f64,
    d: usize,
}

struct MeanSolution {
    mu: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
    iterations: usize,
    delta: f64,
}

impl MeanSystem<'_> {
    fn apply_coupling(&self, v: &[f64], scale: f64) -> Vec<f64> {
        let n = self.coupling.nrows();
        let d = self.d;
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..n {
                let c = self.coupling[(i, j)];
                if c != 0.0 {
                    for k in 0..d {
                        out[i * d + k] += scale * c * v[j * d + k];
                    }
                }
            }
        }
        out
    }

    fn pi_mid(&self, k: usize) -> f64 {
        hermite_mid(self.pi[k], self.pi[k + 1], self.pi_dot[k], self.pi_dot[k + 1], self.grid.dt())
    }

    fn mid_vec(y0: &[f64], y1: &[f64], d0: &[f64], d1: &[f64], h: f64) -> Vec<f64> {
        (0..y0.len()).map(|i| hermite_mid(y0[i], y1[i], d0[i], d1[i], h)).collect()
    }

    /// Backward pass for `ρ` against a frozen `μ` (and the `ρ` used for the
    /// `μ` derivative at the nodes).
    fn backward(&self, mu: &[Vec<f64>], rho_prev: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let steps = self.grid.n_steps;
        let dt = self.grid.dt();
        let mu_dot: Vec<Vec<f64>> = (0..=steps)
            .map(|k| mu[k].iter().zip(&rho_prev[k]).map(|(m, r)| -(self.pi[k] * m + r)).collect())
            .collect();
        let forcing = |m: &[f64]| self.apply_coupling(m, self.a_f);
        let mut rho = vec![Vec::new(); steps + 1];
        rho[steps] = self.apply_coupling(&mu[steps], -self.a_g);
        for k in (0..steps).rev() {
            let g1 = forcing(&mu[k + 1]);
            let gm = forcing(&Self::mid_vec(&mu[k], &mu[k + 1], &mu_dot[k], &mu_dot[k + 1], dt));
            let g0 = forcing(&mu[k]);
            let (p1, pm, p0) = (self.pi[k + 1], self.pi_mid(k), self.pi[k]);
            let y = &rho[k + 1];
            let f = |p: f64, g: &[f64], r: &[f64]| -> Vec<f64> { r.iter().zip(g).map(|(r, g)| p * r + g).collect() };
            let k1 = f(p1, &g1, y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(y, k)| y - 0.5 * dt * k).collect();
            let k2 = f(pm, &gm, &y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(y, k)| y - 0.5 * dt * k).collect();
            let k3 = f(pm, &gm, &y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(y, k)| y - dt * k).collect();
            let k4 = f(p0, &g0, &y4);
            rho[k] = (0..y.len())
                .map(|i| y[i] - dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
        }
        rho
    }

    /// Forward pass for `μ` against a frozen `ρ`.
    fn forward(&self, mu0: &[f64], rho: &[Vec<f64>], mu_prev: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let steps = self.grid.n_steps;
        let dt = self.grid.dt();
        let rho_dot: Vec<Vec<f64>> = (0..=steps)
            .map(|k| {
                let g = self.apply_coupling(&mu_prev[k], self.a_f);
                rho[k].iter().zip(&g).map(|(r, g)| self.pi[k] * r + g).collect()
            })
            .collect();
        let mut mu = Vec::with_capacity(steps + 1);
        mu.push(mu0.to_vec());
        for k in 0..steps {
            let rm = Self::mid_vec(&rho[k], &rho[k + 1], &rho_dot[k], &rho_dot[k + 1], dt);
            let (p0, pm, p1) = (self.pi[k], self.pi_mid(k), self.pi[k + 1]);
            let y: &Vec<f64> = &mu[k];
            let f = |p: f64, r: &[f64], m: &[f64]| -> Vec<f64> { m.iter().zip(r).map(|(m, r)| -(p * m + r)).collect() };
            let k1 = f(p0, &rho[k], y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(y, k)| y + 0.5 * dt * k).collect();
            let k2 = f(pm, &rm, &y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(y, k)| y + 0.5 * dt * k).collect();
            let k3 = f(pm, &rm, &y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(y, k)| y + dt * k).collect();
            let k4 = f(p1, &rho[k + 1], &y4);
            let next = (0..y.len())
                .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            mu.push(next);
        }
        mu
    }

    fn solve(&self, mu0: &[f64], opts: &PicardOptions, solver: &'static str) -> Result<MeanSolution> {
        if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
            return Err(GameError::config(format!("relaxation {} must lie in (0, 1]", opts.relaxation)));
        }
        let len = self.grid.len();
        let mut mu = vec![mu0.to_vec(); len];
        let mut rho = vec![vec![0.0; mu0.len()]; len];
        let mut delta = f64::INFINITY;
        for it in 1..=opts.max_iters {
            rho = self.backward(&mu, &rho);
            let new_mu = self.forward(mu0, &rho, &mu);
            delta = 0.0;
            for (a, b) in new_mu.iter().zip(&mu) {
                for (x, y) in a.iter().zip(b) {
                    delta = f64::max(delta, (x - y).abs());
                }
            }
            if !delta.is_finite() {
                return Err(GameError::NonFinite(format!("{solver} mean flow")));
            }
            let th = opts.relaxation;
            if th == 1.0 {
                mu = new_mu;
            } else {
                for (m, nm) in mu.iter_mut().zip(&new_mu) {
                    for (x, y) in m.iter_mut().zip(nm) {
                        *x = (1.0 - th) * *x + th * y;
                    }
                }
            }
            if delta < opts.tol {
                let rho = self.backward(&mu, &rho);
                return Ok(MeanSolution { mu, rho, iterations: it, delta });
            }
        }
        Err(GameError::NotConverged {
            solver,
            iterations: opts.max_iters,
            delta,
        })
    }
}

fn player_means(game: &GameSpec) -> Vec<f64> {
    (0..game.n).flat_map(|i| game.initial_law.mean(i, game.d)).collect()
}

/// Distributed equilibrium (feedback `−(πXⁱ + ρⁱ)` on the own state only).
pub fn solve_distributed_lq(game: &GameSpec, grid: &TimeGrid, opts: &PicardOptions) -> Result<LQEquilibrium> {
    let c = lq_coefficients(game)?;
    check_grid(game, grid)?;
    if game.sigma0 > 0.0 {
        return Err(GameError::Unsupported(
            "distributed equilibria are only defined without common noise (sigma0 = 0)".into(),
        ));
    }
    let q = c.q_f + c.a_f;
    let pi = solve_pi(q, c.q_g + c.a_g, grid);
    let sys = MeanSystem {
        grid,
        pi_dot: pi.iter().map(|p| p * p - q).collect(),
        pi: &pi,
        coupling: game.weights.matrix(),
        a_f: c.a_f,
        a_g: c.a_g,
        d: game.d,
    };
    let sol = sys.solve(&player_means(game), opts, "distributed Picard")?;
    Ok(LQEquilibrium {
        kind: EquilibriumKind::Distributed,
        grid: *grid,
        n: game.n,
        d: game.d,
        coefficients: Coefficients::Distributed {
            pi,
            rho: sol.rho,
            mu: sol.mu,
            picard_iterations: sol.iterations,
            picard_delta: sol.delta,
        },
    })
}

pub fn solve_mfg_lq(game: &GameSpec, grid: &TimeGrid) -> Result<LQEquilibrium> {
    solve_mfg_lq_with(game, grid, &MeanFieldOptions::default())
}

/// Mean-field limit `𝓕(x, m) = q_f/2 x² + a_f/2 (x − c⟨m⟩)²`.
///
/// The consistency system is solved by Picard iteration on the mean flow and
/// cross-checked against the decoupled form `ρ = ημ̄` with
/// `η' = 2πη + η² + c·a_f`, `η(T) = −c·a_g`. The decoupled form also gives the
/// conditional mean under common noise, `dμ̄ = −(π + η)μ̄ dt + √(2σ₀) dW⁰`,
/// which the simulator integrates per common path.
pub fn solve_mfg_lq_with(game: &GameSpec, grid: &TimeGrid, opts: &MeanFieldOptions) -> Result<LQEquilibrium> {
    let c = lq_coefficients(game)?;
    check_grid(game, grid)?;
    let coupling = opts.coupling.unwrap_or(if game.weights.is_zero() { 0.0 } else { 1.0 });
    let q = c.q_f + c.a_f;
    let (ca_f, ca_g) = (coupling * c.a_f, coupling * c.a_g);
    let pair = integrate_backward::<_, _, _, ()>(
        [c.q_g + c.a_g, -ca_g],
        grid.n_steps,
        grid.dt(),
        |y: &[f64; 2]| [y[0] * y[0] - q, 2.0 * y[0] * y[1] + y[1] * y[1] + ca_f],
        |_, _| Ok(()),
    )
    .expect("infallible");
    let pi: Vec<f64> = pair.iter().map(|y| y[0]).collect();
    let eta: Vec<f64> = pair.iter().map(|y| y[1]).collect();
    if let Some(bad) = eta.iter().position(|e| !e.is_finite()) {
        return Err(GameError::BlowUp {
            time: grid.time(bad),
            norm: f64::INFINITY,
        });
    }

    let d = game.d;
    let means = player_means(game);
    let mut mu0 = vec![0.0; d];
    for i in 0..game.n {
        for k in 0..d {
            mu0[k] += means[i * d + k] / game.n as f64;
        }
    }
    let one = DMatrix::from_element(1, 1, coupling);
    let sys = MeanSystem {
        grid,
        pi_dot: pi.iter().map(|p| p * p - q).collect(),
        pi: &pi,
        coupling: &one,
        a_f: c.a_f,
        a_g: c.a_g,
        d,
    };
    let sol = sys.solve(&mu0, &opts.picard, "mean-field Picard")?;
    let mut gap = 0.0_f64;
    for k in 0..grid.len() {
        for j in 0..d {
            gap = gap.max((sol.rho[k][j] - eta[k] * sol.mu[k][j]).abs());
        }
    }
    Ok(LQEquilibrium {
        kind: EquilibriumKind::MeanField,
        grid: *grid,
        n: game.n,
        d,
        coefficients: Coefficients::MeanField {
            pi,
            eta,
            coupling,
            sigma0: game.sigma0,
            mu_bar: sol.mu,
            rho: sol.rho,
            picard_iterations: sol.iterations,
            decoupling_gap: gap,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, build_weight_matrix, CostModel, InitialLaw, LawComponent, WeightKind, WeightMatrix};
    use crate::riccati::solve_open_loop_lq;

    fn game(model: CostModel, w: WeightMatrix, law: InitialLaw, sigma0: f64) -> GameSpec {
        let n = w.n();
        build_game(model, w, n, 1, TimeGrid::new(0.0, 1.0, 100).unwrap(), 1.0, sigma0, law).unwrap()
    }

    fn parts(eq: &LQEquilibrium) -> (&Vec<f64>, &Vec<Vec<f64>>, &Vec<Vec<f64>>) {
        match &eq.coefficients {
            Coefficients::Distributed { pi, rho, mu, .. } => (pi, rho, mu),
            Coefficients::MeanField { pi, rho, mu_bar, .. } => (pi, rho, mu_bar),
            _ => panic!(),
        }
    }

    #[test]
    fn zero_weights_zero_mean_decouple() {
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), WeightMatrix::zero(4), InitialLaw::standard_gaussian(1), 0.0);
        let eq = solve_distributed_lq(&g, &g.grid, &PicardOptions::default()).unwrap();
        let (pi, rho, mu) = parts(&eq);
        assert!(rho.iter().flatten().all(|&r| r == 0.0));
        assert!(mu.iter().flatten().all(|&m| m == 0.0));
        let ol = solve_open_loop_lq(&g, &g.grid).unwrap();
        for k in 0..=100 {
            for i in 0..4 {
                assert!((ol.lambda().unwrap()[k][(i, i)] - pi[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exchangeable_means_stay_identical() {
        let w = build_weight_matrix(&WeightKind::Complete, 5, 0).unwrap();
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), w, InitialLaw::point_mass(vec![0.7]), 0.0);
        let eq = solve_distributed_lq(&g, &g.grid, &PicardOptions::default()).unwrap();
        let (_, rho, mu) = parts(&eq);
        for k in 0..=100 {
            for i in 1..5 {
                assert!((mu[k][i] - mu[k][0]).abs() < 1e-10);
            }
        }
        // Terminal condition holds exactly.
        let wmu: f64 = (1..5).map(|j| 0.25 * mu[100][j]).sum();
        assert!((rho[100][0] + wmu).abs() < 1e-15);
    }

    #[test]
    fn common_noise_rejected_for_distributed() {
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), WeightMatrix::zero(2), InitialLaw::point_mass(vec![0.0]), 0.1);
        assert!(matches!(
            solve_distributed_lq(&g, &g.grid, &PicardOptions::default()),
            Err(GameError::Unsupported(_))
        ));
    }

    #[test]
    fn mfg_zero_mean_is_trivial() {
        let w = build_weight_matrix(&WeightKind::Complete, 4, 0).unwrap();
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), w, InitialLaw::standard_gaussian(1), 0.0);
        let eq = solve_mfg_lq(&g, &g.grid).unwrap();
        let (_, rho, mu) = parts(&eq);
        assert!(rho.iter().flatten().all(|&r| r == 0.0));
        assert!(mu.iter().flatten().all(|&m| m == 0.0));
    }

    #[test]
    fn mfg_without_coupling_is_single_control_problem() {
        let w = build_weight_matrix(&WeightKind::Complete, 4, 0).unwrap();
        let g = game(CostModel::lq(0.0, 0.0, 0.8, 1.2), w, InitialLaw::point_mass(vec![1.0]), 0.0);
        let eq = solve_mfg_lq(&g, &g.grid).unwrap();
        let single = solve_pi(0.8, 1.2, &g.grid);
        let (pi, rho, _) = parts(&eq);
        assert_eq!(pi, &single);
        assert!(rho.iter().flatten().all(|&r| r == 0.0));
    }

    #[test]
    fn mfg_picard_agrees_with_decoupling() {
        let w = build_weight_matrix(&WeightKind::Complete, 4, 0).unwrap();
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), w, InitialLaw::point_mass(vec![1.0]), 0.0);
        let eq = solve_mfg_lq(&g, &g.grid).unwrap();
        match &eq.coefficients {
            Coefficients::MeanField { decoupling_gap, pi, eta, .. } => {
                assert!(*decoupling_gap < 1e-8, "gap {decoupling_gap}");
                // π + η solves the Riccati equation with the self-cost only.
                let reduced = solve_pi(1.0, 1.0, &g.grid);
                for k in 0..=100 {
                    assert!((pi[k] + eta[k] - reduced[k]).abs() < 1e-8);
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn distributed_means_approach_mean_field() {
        // Alternating starting points 0, 1: each player perceives a mean that
        // is off by O(1/n) from the population mean 1/2.
        let law = |n: usize| InitialLaw::Product {
            components: (0..n).map(|i| LawComponent::PointMass { location: vec![(i % 2) as f64] }).collect(),
        };
        let gap = |n: usize| {
            let w = build_weight_matrix(&WeightKind::Complete, n, 0).unwrap();
            let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), w.clone(), law(n), 0.0);
            let dist = solve_distributed_lq(&g, &g.grid, &PicardOptions::default()).unwrap();
            let mfg = solve_mfg_lq(&g, &g.grid).unwrap();
            let (_, _, mu) = parts(&dist);
            let (_, _, mb) = parts(&mfg);
            let mut worst = 0.0_f64;
            for k in 0..=100 {
                for i in 0..n {
                    let perceived: f64 = (0..n).map(|j| w.get(i, j) * mu[k][j]).sum();
                    worst = worst.max((perceived - mb[k][0]).abs());
                }
            }
            worst
        };
        let (g8, g64) = (gap(8), gap(64));
        assert!(g8 > 1e-3, "g8 {g8}");
        assert!(g64 < 10.0 * g8);
        assert!(g64 < g8 / 4.0, "g8 {g8} g64 {g64}");
    }
}
