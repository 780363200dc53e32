use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::discrete::quantile_cost;
use super::rates::{fit_loglog, rho_rate_full, RateFit};
use crate::error::{GameError, Result};
use crate::format::sci12;

/// Smallest accepted quantile discretization of the mixture.
pub const MIN_GRID_POINTS: usize = 10_000;
/// Smallest accepted number of Monte Carlo repetitions.
pub const MIN_MC_REPS: usize = 16;

/// One-dimensional Gaussian `N(mean, std²)`; `std = 0` is a point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgComponent {
    pub mean: f64,
    pub std: f64,
}

/// Shape of the weight vector `ω` over `n` indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    /// `ωⁱ ∝ 1/i`.
    Harmonic,
    /// `ωⁱ ∝ i^{−exponent}`.
    PowerLaw { exponent: f64 },
    /// All mass on the first index.
    Single,
    /// Normalized explicit weights (length `n`).
    Explicit { weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub id: String,
    pub n: usize,
    #[serde(flatten)]
    pub kind: ProfileKind,
}

impl WeightProfile {
    pub fn new(id: impl Into<String>, n: usize, kind: ProfileKind) -> Self {
        WeightProfile { id: id.into(), n, kind }
    }

    /// Normalized weights.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let n = self.n;
        if n == 0 {
            return Err(GameError::config(format!("profile {} has no indices", self.id)));
        }
        let raw: Vec<f64> = match &self.kind {
            ProfileKind::Uniform => vec![1.0; n],
            ProfileKind::Harmonic => (1..=n).map(|i| 1.0 / i as f64).collect(),
            ProfileKind::PowerLaw { exponent } => (1..=n).map(|i| (i as f64).powf(-exponent)).collect(),
            ProfileKind::Single => (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
            ProfileKind::Explicit { weights } => {
                if weights.len() != n {
                    return Err(GameError::DimensionMismatch(format!(
                        "profile {} lists {} weights for n = {n}",
                        self.id,
                        weights.len()
                    )));
                }
                weights.clone()
            }
        };
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(GameError::config(format!("profile {} has invalid weights", self.id)));
        }
        let s: f64 = raw.iter().sum();
        if s <= 0.0 {
            return Err(GameError::config(format!("profile {} has zero total weight", self.id)));
        }
        Ok(raw.iter().map(|w| w / s).collect())
    }
}

/// Monte Carlo check of the weighted empirical-measure estimate
/// `E[d_r(Σ ωⁱ mⁱ, Σ ωⁱ δ_{ηⁱ})^r] ≲ ρ_{1,q,r}(|ω|⁻²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgConfig {
    #[serde(default = "one")]
    pub d: usize,
    pub q: f64,
    pub r: f64,
    /// Laws `mⁱ`, cycled over the indices.
    pub components: Vec<FgComponent>,
    pub profiles: Vec<WeightProfile>,
    pub mc_reps: usize,
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

fn one() -> usize {
    1
}

fn default_grid() -> usize {
    MIN_GRID_POINTS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgRow {
    pub profile_id: String,
    pub n: usize,
    /// `|ω|⁻²`.
    pub k: f64,
    /// Mean of `d_r^r` over the repetitions.
    pub estimate: f64,
    pub std_error: f64,
    pub rho_theory: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgResult {
    pub rows: Vec<FgRow>,
    /// Log-log fit of the positive estimates against `K`; absent when fewer
    /// than three distinct positive points exist.
    pub fit: Option<RateFit>,
}

impl FgResult {
    /// CSV with columns `profile_id,K,estimate,std_error,rho_theory` and the
    /// fit as a `# {json}` footer.
    pub fn to_csv(&self) -> Result<String> {
        let mut s = String::from("profile_id,K,estimate,std_error,rho_theory\n");
        for row in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                row.profile_id,
                sci12(row.k),
                sci12(row.estimate),
                sci12(row.std_error),
                sci12(row.rho_theory)
            ));
        }
        s.push_str(&format!("# {}\n", serde_json::to_string(&self.fit)?));
        Ok(s)
    }
}

pub fn fg_rate_experiment(config: &FgConfig) -> Result<FgResult> {
    if config.d != 1 {
        return Err(GameError::Unsupported(format!(
            "the weighted empirical-measure experiment runs in d = 1 only, got d = {}",
            config.d
        )));
    }
    if config.mc_reps < MIN_MC_REPS {
        return Err(GameError::config(format!("need at least {MIN_MC_REPS} Monte Carlo repetitions, got {}", config.mc_reps)));
    }
    if config.grid_points < MIN_GRID_POINTS {
        return Err(GameError::config(format!("need at least {MIN_GRID_POINTS} mixture grid points, got {}", config.grid_points)));
    }
    if !(config.r >= 1.0 && config.r < config.q) {
        return Err(GameError::config(format!("need 1 <= r < q, got r = {}, q = {}", config.r, config.q)));
    }
    if config.components.is_empty() {
        return Err(GameError::config("no component laws"));
    }
    if config.components.iter().any(|c| !(c.mean.is_finite() && c.std.is_finite() && c.std >= 0.0)) {
        return Err(GameError::config("component laws need finite means and non-negative scales"));
    }

    let mut rows = Vec::with_capacity(config.profiles.len());
    for (p, profile) in config.profiles.iter().enumerate() {
        let omega = profile.weights()?;
        let k = 1.0 / omega.iter().map(|w| w * w).sum::<f64>();
        let comp = |i: usize| config.components[i % config.components.len()];
        let target = mixture_atoms(&omega, &comp, config.grid_points);
        let samples: Vec<f64> = (0..config.mc_reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(((p as u64) << 32) | rep as u64);
                let mut eta: Vec<(f64, f64)> = Vec::with_capacity(omega.len());
                for (i, &w) in omega.iter().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if w > 0.0 {
                        let c = comp(i);
                        eta.push((c.mean + c.std * z, w));
                    }
                }
                eta.sort_by(|a, b| a.0.total_cmp(&b.0));
                quantile_cost(&target, &eta, config.r)
            })
            .collect();
        let m = samples.len() as f64;
        let estimate = samples.iter().sum::<f64>() / m;
        let var = samples.iter().map(|s| (s - estimate).powi(2)).sum::<f64>() / (m - 1.0);
        rows.push(FgRow {
            profile_id: profile.id.clone(),
            n: profile.n,
            k,
            estimate,
            std_error: (var / m).sqrt(),
            rho_theory: rho_rate_full(1, config.q, config.r, k)?,
        });
    }

    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.estimate > 0.0).map(|r| (r.k, r.estimate)).collect();
    let fit = fit_loglog(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>()).ok();
    Ok(FgResult { rows, fit })
}

/// Sorted atoms of the mixture `Σ ωⁱ mⁱ`: exact when every component is a
/// point mass, otherwise midpoint quantiles `F⁻¹((k + ½)/M)` with mass `1/M`.
fn mixture_atoms(omega: &[f64], comp: &dyn Fn(usize) -> FgComponent, grid_points: usize) -> Vec<(f64, f64)> {
    // Merge indices sharing a law.
    let mut groups: Vec<(FgComponent, f64)> = Vec::new();
    for (i, &w) in omega.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let c = comp(i);
        match groups.iter_mut().find(|g| g.0 == c) {
            Some(g) => g.1 += w,
            None => groups.push((c, w)),
        }
    }
    if groups.iter().all(|g| g.0.std == 0.0) {
        let mut atoms: Vec<(f64, f64)> = groups.iter().map(|g| (g.0.mean, g.1)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        return atoms;
    }
    let cdf = |x: f64| {
        groups
            .iter()
            .map(|(c, w)| {
                let p = if c.std == 0.0 {
                    if x >= c.mean {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    0.5 * erfc(-(x - c.mean) / (c.std * std::f64::consts::SQRT_2))
                };
                w * p
            })
            .sum::<f64>()
    };
    let lo0 = groups.iter().map(|(c, _)| c.mean - 40.0 * c.std).fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = groups.iter().map(|(c, _)| c.mean + 40.0 * c.std).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let mass = 1.0 / grid_points as f64;
    let mut atoms = Vec::with_capacity(grid_points);
    let mut lo = lo0;
    for k in 0..grid_points {
        let t = (k as f64 + 0.5) * mass;
        // Quantiles increase in t, so the previous one is a valid lower bracket.
        let (mut a, mut b) = (lo, hi0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if cdf(mid) >= t {
                b = mid;
            } else {
                a = mid;
            }
        }
        atoms.push((b, mass));
        lo = a;
    }
    atoms
}
