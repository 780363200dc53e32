use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Coefficients, EquilibriumKind, LQEquilibrium};
use crate::error::{GameError, Result};
use crate::game::{GameSpec, NoiseBundle, NoiseFingerprint, TimeGrid};

/// One equilibrium taking part in a coupled simulation.
#[derive(Clone, Debug)]
pub struct Member<'a> {
    pub label: String,
    pub eq: &'a LQEquilibrium,
    /// Idiosyncratic intensity override (the game's `σ` otherwise).
    pub sigma: Option<f64>,
}

impl<'a> Member<'a> {
    pub fn new(eq: &'a LQEquilibrium) -> Self {
        Member {
            label: eq.kind.as_str().to_string(),
            eq,
            sigma: None,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SimulationOptions {
    /// Keep full state/control paths for the first `record_paths` samples.
    pub record_paths: usize,
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapStat {
    pub mean: f64,
    pub std_error: f64,
}

impl GapStat {
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        if xs.len() < 2 {
            return GapStat { mean, std_error: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        GapStat {
            mean,
            std_error: (var / m).sqrt(),
        }
    }
}

/// Path-wise distance between two members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub a: usize,
    pub b: usize,
    pub label: String,
    /// `E[max_k Σ_i |Xᵃ_i − Xᵇ_i|²(t_k)]`.
    pub full: GapStat,
    /// `full / N`.
    pub per_player_avg: GapStat,
    /// `E[(1/N) Σ_i max_k |Xᵃ_i − Xᵇ_i|²]`.
    pub player_mean: GapStat,
    /// `max_i E[max_k |Xᵃ_i − Xᵇ_i|²]` (with that player's standard error).
    pub player_max: GapStat,
    /// `E[max_k |Xᵃ_i − Xᵇ_i|²]` for every player.
    pub per_player: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub label: String,
    pub kind: EquilibriumKind,
    pub sigma: f64,
}

/// States and controls of the first few samples, `[member][path][node][n·d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordedPaths {
    pub n_paths: usize,
    pub states: Vec<Vec<Vec<Vec<f64>>>>,
    pub controls: Vec<Vec<Vec<Vec<f64>>>>,
}

impl RecordedPaths {
    /// Costates `Y = −α` of an open-loop member.
    pub fn costates(&self, member: usize) -> Vec<Vec<Vec<f64>>> {
        self.controls[member]
            .iter()
            .map(|p| p.iter().map(|v| v.iter().map(|a| -a).collect()).collect())
            .collect()
    }
}

/// Output of a coupled simulation on one noise bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBundle {
    pub members: Vec<MemberInfo>,
    pub grid: TimeGrid,
    pub n: usize,
    pub d: usize,
    pub n_paths: usize,
    pub sigma0: f64,
    pub noise: NoiseFingerprint,
    pub gaps: Vec<PairGap>,
    /// Expected cost per member and player (LQ costs, left-point rule).
    pub costs: Vec<Vec<GapStat>>,
    /// `[member][path·n·d]` states at `T`.
    pub terminal: Vec<Vec<f64>>,
    pub recorded: Option<RecordedPaths>,
}

impl TrajectoryBundle {
    pub fn gap(&self, a: &str, b: &str) -> Option<&PairGap> {
        let ia = self.members.iter().position(|m| m.label == a)?;
        let ib = self.members.iter().position(|m| m.label == b)?;
        self.gaps
            .iter()
            .find(|g| (g.a == ia && g.b == ib) || (g.a == ib && g.b == ia))
    }
}

/// Per-member drift data prepared once.
enum Drift<'a> {
    /// Transposed feedback matrices per node; drift `−M x`.
    Linear(Vec<DMatrix<f64>>),
    Distributed { pi: &'a [f64], rho: &'a [Vec<f64>] },
    MeanField { pi: &'a [f64], eta: &'a [f64], rho: &'a [Vec<f64>], mu0: &'a [f64], common: bool },
}

struct PathResult {
    full: Vec<f64>,
    player: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
    terminal: Vec<Vec<f64>>,
    states: Option<Vec<Vec<Vec<f64>>>>,
    controls: Option<Vec<Vec<Vec<f64>>>>,
}

/// Euler–Maruyama on the shared noise:
/// `X_{k+1} = X_k + α_k Δt + √(2σ) ΔWⁱ + √(2σ₀) ΔW⁰`, all members starting
/// from the same initial draw.
pub fn simulate(members: &[Member<'_>], game: &GameSpec, noise: &NoiseBundle, opts: &SimulationOptions) -> Result<TrajectoryBundle> {
    if members.is_empty() {
        return Err(GameError::config("simulation needs at least one member"));
    }
    let (n, d) = (game.n, game.d);
    let grid = noise.grid;
    if noise.n_players != n || noise.d != d {
        return Err(GameError::DimensionMismatch(format!(
            "noise shape ({}, {}) does not match game ({n}, {d})",
            noise.n_players, noise.d
        )));
    }
    for m in members {
        if m.eq.grid != grid {
            return Err(GameError::DimensionMismatch(format!(
                "{} equilibrium has {} steps, noise has {}",
                m.label, m.eq.grid.n_steps, grid.n_steps
            )));
        }
        if m.eq.n != n || m.eq.d != d {
            return Err(GameError::DimensionMismatch(format!("{} equilibrium shape differs from the game", m.label)));
        }
        if let Some(s) = m.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(GameError::config(format!("member sigma {s} must be >= 0")));
            }
        }
    }
    let drifts: Vec<Drift> = members
        .iter()
        .map(|m| match &m.eq.coefficients {
            Coefficients::OpenLoop { lambda: mats } | Coefficients::ClosedLoop { feedback: mats, .. } => {
                Drift::Linear(mats.iter().map(|a| a.transpose()).collect())
            }
            Coefficients::Distributed { pi, rho, .. } => Drift::Distributed { pi, rho },
            Coefficients::MeanField { pi, eta, rho, mu_bar, sigma0, .. } => Drift::MeanField {
                pi,
                eta,
                rho,
                mu0: &mu_bar[0],
                common: *sigma0 > 0.0,
            },
        })
        .collect();
    let sig: Vec<f64> = members.iter().map(|m| (2.0 * m.sigma.unwrap_or(game.sigma)).sqrt()).collect();
    let sig0 = (2.0 * game.sigma0).sqrt();
    let pairs: Vec<(usize, usize)> = (0..members.len())
        .flat_map(|a| (a + 1..members.len()).map(move |b| (a, b)))
        .collect();
    let lq = game.model.lq_coefficients();
    let nd = n * d;
    let dt = grid.dt();
    let steps = grid.n_steps;
    let nm = members.len();

    let run_path = |p: usize| -> PathResult {
        let mut x0 = vec![0.0; nd];
        let normals = noise.init_normals(p);
        let unif = noise.init_uniforms(p);
        for i in 0..n {
            game.initial_law
                .draw_into(i, &normals[i * d..(i + 1) * d], unif[i], &mut x0[i * d..(i + 1) * d]);
        }
        let mut xs = vec![x0; nm];
        let mut mu_bar: Vec<Vec<f64>> = drifts
            .iter()
            .map(|dr| match dr {
                Drift::MeanField { mu0, .. } => mu0.to_vec(),
                _ => Vec::new(),
            })
            .collect();
        let record = p < opts.record_paths;
        let mut states = record.then(|| vec![Vec::with_capacity(steps + 1); nm]);
        let mut controls = record.then(|| vec![Vec::with_capacity(steps + 1); nm]);
        let mut full = vec![0.0; pairs.len()];
        let mut player = vec![vec![0.0; n]; pairs.len()];
        let mut costs = vec![vec![0.0; n]; nm];
        let mut alpha = vec![vec![0.0; nd]; nm];

        let track = |xs: &[Vec<f64>], full: &mut [f64], player: &mut [Vec<f64>]| {
            for (pi, &(a, b)) in pairs.iter().enumerate() {
                let mut tot = 0.0;
                for i in 0..n {
                    let mut s = 0.0;
                    for c in 0..d {
                        let diff = xs[a][i * d + c] - xs[b][i * d + c];
                        s += diff * diff;
                    }
                    tot += s;
                    if s > player[pi][i] {
                        player[pi][i] = s;
                    }
                }
                if tot > full[pi] {
                    full[pi] = tot;
                }
            }
        };
        let lq_cost = |x: &[f64], terminal: bool, out: &mut [f64], scale: f64| {
            let Some(c) = lq else { return };
            let (a, q) = if terminal { (c.a_g, c.q_g) } else { (c.a_f, c.q_f) };
            let w = game.weights.matrix();
            for i in 0..n {
                for k in 0..d {
                    let mut avg = 0.0;
                    for j in 0..n {
                        avg += w[(i, j)] * x[j * d + k];
                    }
                    let xi = x[i * d + k];
                    out[i] += scale * (0.5 * q * xi * xi + 0.5 * a * (xi - avg) * (xi - avg));
                }
            }
        };

        track(&xs, &mut full, &mut player);
        for k in 0..=steps {
            for (m, dr) in drifts.iter().enumerate() {
                let x = &xs[m];
                let al = &mut alpha[m];
                match dr {
                    Drift::Linear(mt) => {
                        let s = mt[k].as_slice();
                        for i in 0..n {
                            let col = &s[i * n..(i + 1) * n];
                            for c in 0..d {
                                let mut acc = 0.0;
                                for (j, v) in col.iter().enumerate() {
                                    acc += v * x[j * d + c];
                                }
                                al[i * d + c] = -acc;
                            }
                        }
                    }
                    Drift::Distributed { pi, rho } => {
                        for (idx, a) in al.iter_mut().enumerate() {
                            *a = -(pi[k] * x[idx] + rho[k][idx]);
                        }
                    }
                    Drift::MeanField { pi, eta, rho, common, .. } => {
                        for i in 0..n {
                            for c in 0..d {
                                let r = if *common { eta[k] * mu_bar[m][c] } else { rho[k][c] };
                                al[i * d + c] = -(pi[k] * x[i * d + c] + r);
                            }
                        }
                    }
                }
            }
            if let (Some(st), Some(ct)) = (states.as_mut(), controls.as_mut()) {
                for m in 0..nm {
                    st[m].push(xs[m].clone());
                    ct[m].push(alpha[m].clone());
                }
            }
            if k == steps {
                break;
            }
            let dw = noise.idiosyncratic(p, k);
            let dw0 = noise.common(p, k);
            for m in 0..nm {
                if lq.is_some() {
                    let al = &alpha[m];
                    for i in 0..n {
                        let e: f64 = al[i * d..(i + 1) * d].iter().map(|a| a * a).sum();
                        costs[m][i] += 0.5 * e * dt;
                    }
                    lq_cost(&xs[m], false, &mut costs[m], dt);
                }
                let x = &mut xs[m];
                for i in 0..n {
                    for c in 0..d {
                        let idx = i * d + c;
                        x[idx] += alpha[m][idx] * dt + sig[m] * dw[idx] + sig0 * dw0[c];
                    }
                }
                if let Drift::MeanField { pi, eta, common: true, .. } = &drifts[m] {
                    for c in 0..d {
                        let mb = mu_bar[m][c];
                        mu_bar[m][c] = mb - (pi[k] + eta[k]) * mb * dt + sig0 * dw0[c];
                    }
                }
            }
            track(&xs, &mut full, &mut player);
        }
        for m in 0..nm {
            lq_cost(&xs[m], true, &mut costs[m], 1.0);
        }
        PathResult {
            full,
            player,
            costs,
            terminal: xs,
            states,
            controls,
        }
    };

    let results: Vec<PathResult> = (0..noise.n_paths).into_par_iter().map(run_path).collect();

    let n_paths = noise.n_paths;
    let gaps = pairs
        .iter()
        .enumerate()
        .map(|(pi, &(a, b))| {
            let fulls: Vec<f64> = results.iter().map(|r| r.full[pi]).collect();
            let full = GapStat::from_samples(&fulls);
            let means: Vec<f64> = results.iter().map(|r| r.player[pi].iter().sum::<f64>() / n as f64).collect();
            let per_player_stats: Vec<GapStat> = (0..n)
                .map(|i| GapStat::from_samples(&results.iter().map(|r| r.player[pi][i]).collect::<Vec<_>>()))
                .collect();
            let player_max = per_player_stats
                .iter()
                .copied()
                .fold(GapStat { mean: f64::NEG_INFINITY, std_error: 0.0 }, |acc, s| if s.mean > acc.mean { s } else { acc });
            PairGap {
                a,
                b,
                label: format!("{}-{}", members[a].label, members[b].label),
                full,
                per_player_avg: GapStat {
                    mean: full.mean / n as f64,
                    std_error: full.std_error / n as f64,
                },
                player_mean: GapStat::from_samples(&means),
                player_max,
                per_player: per_player_stats.iter().map(|s| s.mean).collect(),
            }
        })
        .collect();
    let costs = if lq.is_some() {
        (0..nm)
            .map(|m| {
                (0..n)
                    .map(|i| GapStat::from_samples(&results.iter().map(|r| r.costs[m][i]).collect::<Vec<_>>()))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    let terminal = (0..nm)
        .map(|m| results.iter().flat_map(|r| r.terminal[m].iter().copied()).collect())
        .collect();
    let recorded = (opts.record_paths > 0).then(|| {
        let kept: Vec<&PathResult> = results.iter().filter(|r| r.states.is_some()).collect();
        RecordedPaths {
            n_paths: kept.len(),
            states: (0..nm).map(|m| kept.iter().map(|r| r.states.as_ref().unwrap()[m].clone()).collect()).collect(),
            controls: (0..nm).map(|m| kept.iter().map(|r| r.controls.as_ref().unwrap()[m].clone()).collect()).collect(),
        }
    });
    Ok(TrajectoryBundle {
        members: members
            .iter()
            .map(|m| MemberInfo {
                label: m.label.clone(),
                kind: m.eq.kind,
                sigma: m.sigma.unwrap_or(game.sigma),
            })
            .collect(),
        grid,
        n,
        d,
        n_paths,
        sigma0: game.sigma0,
        noise: noise.fingerprint(),
        gaps,
        costs,
        terminal,
        recorded,
    })
}
