use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, NewtonOptions};
use crate::error::{GameError, Result};
use crate::game::{CostModel, GameSpec, PhiKind, TimeGrid};
use crate::riccati::ode::hermite_mid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MkvOptions {
    /// Tolerance on `sup_t W₂` between successive particle clouds.
    pub tol: f64,
    pub max_iters: usize,
    /// Per-particle shooting.
    pub newton: NewtonOptions,
}

impl Default for MkvOptions {
    fn default() -> Self {
        MkvOptions {
            tol: 1e-9,
            max_iters: 200,
            newton: NewtonOptions {
                tol: 1e-11,
                ..NewtonOptions::default()
            },
        }
    }
}

/// Deterministic mean-field equilibrium flow represented by particles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MkvSolution {
    pub grid: TimeGrid,
    /// `[particle][node][coord]`.
    pub x_paths: Vec<Vec<Vec<f64>>>,
    pub y_paths: Vec<Vec<Vec<f64>>>,
    /// The flow statistic the particles see: `⟨m_t⟩` (LQ) or `∫φ dm_t`.
    pub flow: Vec<Vec<f64>>,
    /// Time derivative of the flow statistic.
    pub flow_dot: Vec<Vec<f64>>,
    /// `sup_t W₂` between successive clouds (matched by index).
    pub deltas: Vec<f64>,
    pub iterations: usize,
}

/// `([node][coord] states, [node][coord] costates)` of one particle.
pub type ParticlePath = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Mean-field limit of the built-in network costs.
#[derive(Clone, Copy)]
enum Limit {
    /// `𝓕(x, m) = q/2|x|² + a/2|x − c⟨m⟩|²`.
    Lq { a_f: f64, a_g: f64, q_f: f64, q_g: f64, c: f64 },
    /// `𝓕(x, m) = A/2 (φ(x) − c∫φ dm)²`.
    Phi { a: f64, phi: PhiKind, c: f64 },
}

impl Limit {
    fn of(game: &GameSpec) -> Result<Limit> {
        let c = if game.weights.is_zero() { 0.0 } else { 1.0 };
        match game.model {
            CostModel::LqNetwork { a_f, a_g, q_f, q_g } => Ok(Limit::Lq { a_f, a_g, q_f, q_g, c }),
            CostModel::PhiNetwork { a, phi } => Ok(Limit::Phi { a, phi, c }),
            CostModel::Custom(_) => Err(GameError::Unsupported("mean-field limit of a custom model".into())),
        }
    }

    /// `D_x𝓕(x, s)` for the flow statistic `s`.
    fn grad(&self, x: &[f64], s: &[f64], terminal: bool, out: &mut [f64]) {
        match *self {
            Limit::Lq { a_f, a_g, q_f, q_g, c } => {
                let (a, q) = if terminal { (a_g, q_g) } else { (a_f, q_f) };
                for k in 0..x.len() {
                    out[k] = q * x[k] + a * (x[k] - c * s[k]);
                }
            }
            Limit::Phi { a, phi, c } => out[0] = a * (phi.eval(x[0]) - c * s[0]) * phi.d1(x[0]),
        }
    }

    /// Flow statistic of a cloud and its time derivative given the
    /// velocities `−Y`. Summation runs over sorted terms so the result does
    /// not depend on the particle order.
    fn statistic(&self, xs: &[&[f64]], ys: &[&[f64]], d: usize) -> (Vec<f64>, Vec<f64>) {
        let p = xs.len() as f64;
        let sorted_mean = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.iter().sum::<f64>() / p
        };
        match *self {
            Limit::Lq { .. } => {
                let s = (0..d).map(|c| sorted_mean(xs.iter().map(|x| x[c]).collect())).collect();
                let ds = (0..d).map(|c| -sorted_mean(ys.iter().map(|y| y[c]).collect())).collect();
                (s, ds)
            }
            Limit::Phi { phi, .. } => {
                let s = sorted_mean(xs.iter().map(|x| phi.eval(x[0])).collect());
                let ds = -sorted_mean(xs.iter().zip(ys).map(|(x, y)| phi.d1(x[0]) * y[0]).collect());
                (vec![s], vec![ds])
            }
        }
    }
}

/// RK4 on `(X, Y)` for one particle against a frozen flow with node values
/// `s` and derivatives `ds` (midpoints by cubic Hermite interpolation).
fn particle_path(limit: &Limit, grid: &TimeGrid, s: &[Vec<f64>], ds: &[Vec<f64>], x0: &[f64], y0: &[f64]) -> ParticlePath {
    let d = x0.len();
    let dt = grid.dt();
    let rhs = |x: &[f64], y: &[f64], st: &[f64]| {
        let mut g = vec![0.0; d];
        limit.grad(x, st, false, &mut g);
        let fx: Vec<f64> = y.iter().map(|v| -v).collect();
        let fy: Vec<f64> = g.iter().map(|v| -v).collect();
        (fx, fy)
    };
    let mut xs = vec![x0.to_vec()];
    let mut ys = vec![y0.to_vec()];
    for k in 0..grid.n_steps {
        let sm: Vec<f64> = (0..s[k].len()).map(|c| hermite_mid(s[k][c], s[k + 1][c], ds[k][c], ds[k + 1][c], dt)).collect();
        let (x, y) = (&xs[k], &ys[k]);
        let add = |a: &[f64], b: &[f64], h: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + h * b).collect() };
        let (k1x, k1y) = rhs(x, y, &s[k]);
        let (k2x, k2y) = rhs(&add(x, &k1x, 0.5 * dt), &add(y, &k1y, 0.5 * dt), &sm);
        let (k3x, k3y) = rhs(&add(x, &k2x, 0.5 * dt), &add(y, &k2y, 0.5 * dt), &sm);
        let (k4x, k4y) = rhs(&add(x, &k3x, dt), &add(y, &k3y, dt), &s[k + 1]);
        let nx = (0..d).map(|c| x[c] + dt / 6.0 * (k1x[c] + 2.0 * k2x[c] + 2.0 * k3x[c] + k4x[c])).collect();
        let ny = (0..d).map(|c| y[c] + dt / 6.0 * (k1y[c] + 2.0 * k2y[c] + 2.0 * k3y[c] + k4y[c])).collect();
        xs.push(nx);
        ys.push(ny);
    }
    (xs, ys)
}

/// Shooting on `Y(0)` for one particle against a frozen flow.
fn shoot_particle(
    limit: &Limit,
    grid: &TimeGrid,
    flow: &[Vec<f64>],
    flow_dot: &[Vec<f64>],
    x0: &[f64],
    y_guess: &[f64],
    opts: &NewtonOptions,
) -> Result<ParticlePath> {
    let len = grid.len();
    let d = x0.len();
    let shoot = |y0: &[f64]| {
        let (xs, ys) = particle_path(limit, grid, flow, flow_dot, x0, y0);
        let mut g = vec![0.0; d];
        limit.grad(&xs[len - 1], &flow[len - 1], true, &mut g);
        ys[len - 1].iter().zip(&g).map(|(y, g)| y - g).collect()
    };
    let sol = newton_solve(y_guess, shoot, opts, "particle shooting")?;
    Ok(particle_path(limit, grid, flow, flow_dot, x0, &sol.x))
}

impl MkvSolution {
    /// Equilibrium path `(X, Y)` of a representative player started at `x0`
    /// facing the computed flow (the i.i.d. mean-field copies).
    pub fn particle(&self, game: &GameSpec, x0: &[f64], opts: &NewtonOptions) -> Result<ParticlePath> {
        if x0.len() != game.d {
            return Err(GameError::DimensionMismatch(format!("start has dimension {}, game has d = {}", x0.len(), game.d)));
        }
        let limit = Limit::of(game)?;
        shoot_particle(&limit, &self.grid, &self.flow, &self.flow_dot, x0, &vec![0.0; game.d], opts)
    }
}

/// Picard iteration over the flow of particle clouds for the deterministic
/// mean-field game (`σ = σ₀ = 0`) started from the cloud `m0`.
pub fn solve_mkv_deterministic(game: &GameSpec, m0: &[Vec<f64>], opts: &MkvOptions) -> Result<MkvSolution> {
    if game.sigma != 0.0 || game.sigma0 != 0.0 {
        return Err(GameError::config("the particle McKean-Vlasov solver needs sigma = sigma0 = 0"));
    }
    if m0.is_empty() {
        return Err(GameError::config("initial particle cloud is empty"));
    }
    let d = game.d;
    if m0.iter().any(|p| p.len() != d) {
        return Err(GameError::DimensionMismatch(format!("particles must have dimension {d}")));
    }
    let limit = Limit::of(game)?;
    let grid = game.grid;
    let len = grid.len();

    let x0s: Vec<&[f64]> = m0.iter().map(|v| v.as_slice()).collect();
    let zeros = vec![0.0; d];
    let (s0, _) = limit.statistic(&x0s, &vec![zeros.as_slice(); m0.len()], d);
    let mut flow = vec![s0.clone(); len];
    let mut flow_dot = vec![vec![0.0; s0.len()]; len];
    let mut cloud: Vec<Vec<Vec<f64>>> = m0.iter().map(|x| vec![x.clone(); len]).collect();
    let mut y_cloud: Vec<Vec<Vec<f64>>> = m0.iter().map(|_| vec![zeros.clone(); len]).collect();
    let mut deltas = Vec::new();

    for it in 1..=opts.max_iters {
        let solved: Vec<Result<ParticlePath>> = m0
            .par_iter()
            .zip(y_cloud.par_iter())
            .map(|(x0, yprev)| {
                shoot_particle(&limit, &grid, &flow, &flow_dot, x0, &yprev[0], &opts.newton)
            })
            .collect();
        let mut new_cloud = Vec::with_capacity(m0.len());
        let mut new_y = Vec::with_capacity(m0.len());
        for r in solved {
            let (xs, ys) = r?;
            new_cloud.push(xs);
            new_y.push(ys);
        }
        let mut delta = 0.0_f64;
        for k in 0..len {
            let sq: f64 = new_cloud
                .iter()
                .zip(&cloud)
                .map(|(a, b)| a[k].iter().zip(&b[k]).map(|(u, v)| (u - v).powi(2)).sum::<f64>())
                .sum();
            delta = delta.max((sq / m0.len() as f64).sqrt());
        }
        deltas.push(delta);
        cloud = new_cloud;
        y_cloud = new_y;
        for k in 0..len {
            let xs: Vec<&[f64]> = cloud.iter().map(|p| p[k].as_slice()).collect();
            let ys: Vec<&[f64]> = y_cloud.iter().map(|p| p[k].as_slice()).collect();
            let (s, ds) = limit.statistic(&xs, &ys, d);
            flow[k] = s;
            flow_dot[k] = ds;
        }
        if delta < opts.tol {
            return Ok(MkvSolution {
                grid,
                x_paths: cloud,
                y_paths: y_cloud,
                flow,
                flow_dot,
                deltas,
                iterations: it,
            });
        }
    }
    Err(GameError::NotConverged {
        solver: "McKean-Vlasov Picard",
        iterations: opts.max_iters,
        delta: *deltas.last().unwrap_or(&f64::INFINITY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, build_weight_matrix, InitialLaw, WeightKind};

    fn game(model: CostModel) -> GameSpec {
        let w = build_weight_matrix(&WeightKind::Complete, 4, 0).unwrap();
        build_game(model, w, 4, 1, TimeGrid::new(0.0, 1.0, 100).unwrap(), 0.0, 0.0, InitialLaw::point_mass(vec![0.0])).unwrap()
    }

    fn scalar_pi(q: f64, qg: f64) -> f64 {
        // π' = π² − q, π(1) = qg, evaluated at 0 with a fine solve.
        let mut p = qg;
        let n = 100_000;
        let h = 1.0 / n as f64;
        for _ in 0..n {
            p -= h * (p * p - q);
        }
        p
    }

    #[test]
    fn representative_particle_matches_cloud_member() {
        let g = game(CostModel::PhiNetwork { a: 1.0, phi: PhiKind::Tanh });
        let cloud: Vec<Vec<f64>> = (0..20).map(|k| vec![-1.0 + 2.0 * k as f64 / 19.0 + 0.2]).collect();
        let s = solve_mkv_deterministic(&g, &cloud, &MkvOptions::default()).unwrap();
        let (xs, ys) = s.particle(&g, &cloud[7], &MkvOptions::default().newton).unwrap();
        for k in 0..xs.len() {
            assert!((xs[k][0] - s.x_paths[7][k][0]).abs() < 1e-8);
            assert!((ys[k][0] - s.y_paths[7][k][0]).abs() < 1e-8);
        }
    }

    #[test]
    fn uncoupled_particles_need_one_update() {
        let g = game(CostModel::lq(0.0, 0.0, 1.0, 1.0));
        let cloud: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64 - 1.0]).collect();
        let s = solve_mkv_deterministic(&g, &cloud, &MkvOptions::default()).unwrap();
        assert_eq!(s.iterations, 2);
        assert_eq!(s.deltas[1], 0.0);
    }

    #[test]
    fn symmetric_two_point_cloud() {
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0));
        let s = solve_mkv_deterministic(&g, &[vec![-1.0], vec![1.0]], &MkvOptions::default()).unwrap();
        assert!(s.flow.iter().all(|m| m[0].abs() < 1e-12));
        let pi0 = scalar_pi(2.0, 2.0);
        assert!((s.y_paths[1][0][0] - pi0).abs() < 1e-4, "{} vs {pi0}", s.y_paths[1][0][0]);
        for k in 0..=100 {
            assert!((s.x_paths[0][k][0] + s.x_paths[1][k][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn tanh_cloud_converges_with_decreasing_deltas() {
        let g = game(CostModel::PhiNetwork { a: 1.0, phi: PhiKind::Tanh });
        let cloud: Vec<Vec<f64>> = (0..50).map(|k| vec![-2.0 + 4.0 * (k as f64 + 0.5) / 50.0 + 0.3]).collect();
        let s = solve_mkv_deterministic(&g, &cloud, &MkvOptions::default()).unwrap();
        assert!(s.deltas.len() >= 2);
        for w in s.deltas[2..].windows(2) {
            assert!(w[1] < w[0], "{:?}", s.deltas);
        }
    }

    #[test]
    fn permutation_invariant() {
        let g = game(CostModel::PhiNetwork { a: 1.0, phi: PhiKind::Tanh });
        let cloud: Vec<Vec<f64>> = (0..7).map(|k| vec![(k as f64 * 1.7).sin() * 2.0]).collect();
        let mut perm = cloud.clone();
        perm.reverse();
        perm.swap(0, 3);
        let a = solve_mkv_deterministic(&g, &cloud, &MkvOptions::default()).unwrap();
        let b = solve_mkv_deterministic(&g, &perm, &MkvOptions::default()).unwrap();
        assert_eq!(a.flow, b.flow);
    }
}
