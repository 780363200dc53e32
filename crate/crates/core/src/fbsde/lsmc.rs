use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{GameError, Result};
use crate::game::{GameSpec, NoiseBundle, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsmcOptions {
    /// Total degree of the polynomial features of the full state (1 or 2).
    pub basis_degree: usize,
    /// RMS change of the `Y` samples that counts as converged.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LsmcOptions {
    fn default() -> Self {
        LsmcOptions {
            basis_degree: 1,
            tol: 1e-6,
            max_iters: 50,
        }
    }
}

/// Approximate open-loop solution for `σ > 0` (regression-based; not an
/// oracle).
#[derive(Clone, Debug)]
pub struct ApproxSolution {
    pub grid: TimeGrid,
    pub basis_degree: usize,
    /// RMS change of the `Y` samples per Picard iteration.
    pub deltas: Vec<f64>,
    pub converged: bool,
    /// `[node][path][player·d + coord]`.
    pub x_samples: Vec<Vec<Vec<f64>>>,
    pub y_samples: Vec<Vec<Vec<f64>>>,
    /// Controls used to generate `x_samples` (from the previous iterate).
    pub feedback_samples: Vec<Vec<Vec<f64>>>,
    /// `[node]`: `features × (n·d)` regression coefficients.
    pub coefficients: Vec<DMatrix<f64>>,
    pub std_errors: Vec<DMatrix<f64>>,
    pub noise: Arc<NoiseBundle>,
}

impl ApproxSolution {
    pub fn n_paths(&self) -> usize {
        self.noise.n_paths
    }
}

pub(crate) fn n_features(m: usize, degree: usize) -> usize {
    match degree {
        1 => 1 + m,
        _ => 1 + m + m * (m + 1) / 2,
    }
}

/// `[1, x]` or `[1, x, x_a x_b (a ≤ b)]`.
pub(crate) fn features(x: &[f64], degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    out[1..=x.len()].copy_from_slice(x);
    if degree == 2 {
        let mut idx = 1 + x.len();
        for a in 0..x.len() {
            for b in a..x.len() {
                out[idx] = x[a] * x[b];
                idx += 1;
            }
        }
    }
}

struct Regression {
    beta: DMatrix<f64>,
    se: DMatrix<f64>,
}

/// Least squares through the SVD (minimum-norm when the design is rank
/// deficient, e.g. at a deterministic start).
fn regress(design: &DMatrix<f64>, targets: &DMatrix<f64>) -> Regression {
    let (p, f) = design.shape();
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = smax * 1e-10 * (p.max(f) as f64);
    let u = svd.u.as_ref().expect("u");
    let vt = svd.v_t.as_ref().expect("v_t");
    let r = svd.singular_values.len();
    let mut beta = DMatrix::zeros(f, targets.ncols());
    let mut diag = vec![0.0; f];
    let mut rank = 0;
    for s in 0..r {
        let sv = svd.singular_values[s];
        if sv <= cut || sv == 0.0 {
            continue;
        }
        rank += 1;
        let proj = u.column(s).transpose() * targets;
        for j in 0..f {
            let v = vt[(s, j)];
            diag[j] += v * v / (sv * sv);
            for c in 0..targets.ncols() {
                beta[(j, c)] += v * proj[c] / sv;
            }
        }
    }
    let resid = targets - design * &beta;
    let dof = (p as f64 - rank as f64).max(1.0);
    let mut se = DMatrix::zeros(f, targets.ncols());
    for c in 0..targets.ncols() {
        let s2 = resid.column(c).norm_squared() / dof;
        for j in 0..f {
            se[(j, c)] = (s2 * diag[j]).sqrt();
        }
    }
    Regression { beta, se }
}

/// Picard iteration: simulate with the current feedback, regress the
/// full-path costate target `D_iGⁱ(X_T) − Σ_{l≥k}(D_xH − D_iFⁱ)(X_l)Δt` on
/// polynomial features of `X_k`, repeat until the `Y` samples settle.
pub fn solve_pontryagin_picard_lsmc(game: &GameSpec, noise: Arc<NoiseBundle>, opts: &LsmcOptions) -> Result<ApproxSolution> {
    if !(1..=2).contains(&opts.basis_degree) {
        return Err(GameError::config(format!("basis_degree must be 1 or 2, got {}", opts.basis_degree)));
    }
    if game.sigma <= 0.0 {
        return Err(GameError::config("LSMC-Picard needs sigma > 0; use shooting for the deterministic game"));
    }
    if noise.n_players != game.n || noise.d != game.d || noise.grid != game.grid {
        return Err(GameError::DimensionMismatch("noise bundle does not match the game".into()));
    }
    let (n, d) = (game.n, game.d);
    let nd = n * d;
    let grid = game.grid;
    let steps = grid.n_steps;
    let dt = grid.dt();
    let paths = noise.n_paths;
    let nf = n_features(nd, opts.basis_degree);
    let deg = opts.basis_degree;
    let sig = (2.0 * game.sigma).sqrt();
    let sig0 = (2.0 * game.sigma0).sqrt();
    let ham = game.hamiltonian();

    let mut coefficients: Vec<DMatrix<f64>> = vec![DMatrix::zeros(nf, nd); steps + 1];
    let mut std_errors = coefficients.clone();
    let mut deltas = Vec::new();
    let mut converged = false;
    let mut state = None;

    for _ in 0..opts.max_iters {
        // Forward pass under the previous feedback.
        #[allow(clippy::type_complexity)]
        let sims: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let mut x = vec![0.0; nd];
                let normals = noise.init_normals(p);
                let unif = noise.init_uniforms(p);
                for i in 0..n {
                    game.initial_law
                        .draw_into(i, &normals[i * d..(i + 1) * d], unif[i], &mut x[i * d..(i + 1) * d]);
                }
                let mut xs = Vec::with_capacity(steps + 1);
                let mut ys = Vec::with_capacity(steps + 1);
                let mut als = Vec::with_capacity(steps + 1);
                let mut phi = vec![0.0; nf];
                let mut buf = vec![0.0; d];
                for k in 0..=steps {
                    features(&x, deg, &mut phi);
                    let y: Vec<f64> = (0..nd)
                        .map(|c| (0..nf).map(|f| phi[f] * coefficients[k][(f, c)]).sum())
                        .collect();
                    let mut al = vec![0.0; nd];
                    for i in 0..n {
                        ham.d_p(&x[i * d..(i + 1) * d], &y[i * d..(i + 1) * d], &mut buf);
                        for c in 0..d {
                            al[i * d + c] = -buf[c];
                        }
                    }
                    xs.push(x.clone());
                    ys.push(y);
                    als.push(al.clone());
                    if k < steps {
                        let dw = noise.idiosyncratic(p, k);
                        let dw0 = noise.common(p, k);
                        for idx in 0..nd {
                            x[idx] += al[idx] * dt + sig * dw[idx] + sig0 * dw0[idx % d];
                        }
                    }
                }
                (xs, ys, als)
            })
            .collect();

        // Backward regression of the full-path targets.
        let targets: Vec<Vec<Vec<f64>>> = sims
            .par_iter()
            .map(|(xs, ys, _)| {
                let mut out = vec![vec![0.0; nd]; steps + 1];
                let mut acc = vec![0.0; nd];
                let mut g = vec![0.0; d];
                let mut hx = vec![0.0; d];
                for i in 0..n {
                    game.model.own_gradient(&game.weights, d, i, &xs[steps], true, &mut g);
                    acc[i * d..(i + 1) * d].copy_from_slice(&g);
                }
                out[steps] = acc.clone();
                for k in (0..steps).rev() {
                    for i in 0..n {
                        game.model.own_gradient(&game.weights, d, i, &xs[k], false, &mut g);
                        ham.d_x(&xs[k][i * d..(i + 1) * d], &ys[k][i * d..(i + 1) * d], &mut hx);
                        for c in 0..d {
                            acc[i * d + c] -= (hx[c] - g[c]) * dt;
                        }
                    }
                    out[k] = acc.clone();
                }
                out
            })
            .collect();
        let fits: Vec<Regression> = (0..=steps)
            .into_par_iter()
            .map(|k| {
                let mut design = DMatrix::zeros(paths, nf);
                let mut phi = vec![0.0; nf];
                for p in 0..paths {
                    features(&sims[p].0[k], deg, &mut phi);
                    for f in 0..nf {
                        design[(p, f)] = phi[f];
                    }
                }
                let t = DMatrix::from_fn(paths, nd, |p, c| targets[p][k][c]);
                regress(&design, &t)
            })
            .collect();
        let mut y_new = vec![vec![vec![0.0; nd]; paths]; steps + 1];
        let mut sq = 0.0;
        let mut phi = vec![0.0; nf];
        for k in 0..=steps {
            for p in 0..paths {
                features(&sims[p].0[k], deg, &mut phi);
                for c in 0..nd {
                    let y: f64 = (0..nf).map(|f| phi[f] * fits[k].beta[(f, c)]).sum();
                    y_new[k][p][c] = y;
                    sq += (y - sims[p].1[k][c]).powi(2);
                }
            }
        }
        let delta = (sq / ((steps + 1) * paths * nd) as f64).sqrt();
        if !delta.is_finite() {
            return Err(GameError::NonFinite("LSMC costate samples".into()));
        }
        deltas.push(delta);
        coefficients = fits.iter().map(|r| r.beta.clone()).collect();
        std_errors = fits.into_iter().map(|r| r.se).collect();
        state = Some((sims, y_new));
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    let (sims, y_samples) = state.expect("at least one iteration");
    let mut x_samples = vec![Vec::with_capacity(paths); steps + 1];
    let mut feedback_samples = vec![Vec::with_capacity(paths); steps + 1];
    for (xs, _, als) in sims {
        for (k, (x, a)) in xs.into_iter().zip(als).enumerate() {
            x_samples[k].push(x);
            feedback_samples[k].push(a);
        }
    }
    Ok(ApproxSolution {
        grid,
        basis_degree: deg,
        deltas,
        converged,
        x_samples,
        y_samples,
        feedback_samples,
        coefficients,
        std_errors,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbsde::lsmc_residual;
    use crate::game::{build_game, build_weight_matrix, CostModel, InitialLaw, WeightKind};
    use crate::riccati::solve_open_loop_lq;

    fn game(model: CostModel, n: usize, steps: usize) -> GameSpec {
        let w = build_weight_matrix(&WeightKind::Complete, n, 0).unwrap();
        build_game(model, w, n, 1, TimeGrid::new(0.0, 1.0, steps).unwrap(), 0.5, 0.0, InitialLaw::standard_gaussian(1)).unwrap()
    }

    #[test]
    fn zero_costs_converge_immediately() {
        let g = game(CostModel::lq(0.0, 0.0, 0.0, 0.0), 2, 20);
        let noise = Arc::new(NoiseBundle::generate(2, 1, g.grid, 64, 1).unwrap());
        let s = solve_pontryagin_picard_lsmc(&g, noise, &LsmcOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.deltas.len(), 1);
        let rms = (s.y_samples.iter().flatten().flatten().map(|y| y * y).sum::<f64>() / (21.0 * 64.0 * 2.0)).sqrt();
        assert!(rms < 1e-8);
    }

    #[test]
    fn degree_three_rejected() {
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), 2, 10);
        let noise = Arc::new(NoiseBundle::generate(2, 1, g.grid, 16, 1).unwrap());
        let opts = LsmcOptions { basis_degree: 3, ..Default::default() };
        assert!(matches!(solve_pontryagin_picard_lsmc(&g, noise, &opts), Err(GameError::Config(_))));
    }

    #[test]
    fn linear_features_recover_riccati_gains() {
        let g = game(CostModel::lq(1.0, 1.0, 1.0, 1.0), 2, 100);
        let noise = Arc::new(NoiseBundle::generate(2, 1, g.grid, 2000, 4).unwrap());
        let s = solve_pontryagin_picard_lsmc(&g, noise, &LsmcOptions { tol: 1e-8, ..Default::default() }).unwrap();
        assert!(s.converged, "deltas {:?}", s.deltas);
        let ol = solve_open_loop_lq(&g, &g.grid).unwrap();
        let lam = ol.lambda().unwrap();
        let mut outside = 0;
        let mut total = 0;
        for k in 0..100 {
            for i in 0..2 {
                for j in 0..2 {
                    let b = s.coefficients[k][(1 + j, i)];
                    let se = s.std_errors[k][(1 + j, i)];
                    total += 1;
                    if (b - lam[k][(i, j)]).abs() > 3.0 * se {
                        outside += 1;
                    }
                }
            }
        }
        // Roughly 0.3% expected outside 3 SE; allow a margin for time
        // discretization bias.
        assert!(outside * 20 <= total, "{outside} of {total} outside 3 SE");
        let r = lsmc_residual(&s, &g);
        assert!(r.max_forward().is_finite() && r.max_backward().is_finite() && r.max_terminal().is_finite());
    }
}
