use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use super::spec::GameSpec;
use crate::error::{GameError, Result};

/// Pre-generated Brownian increments and initial-state randomness shared by
/// every simulator (common random numbers).
///
/// Path `p` is generated from its own ChaCha8 stream (`seed`, stream `p`), so
/// the bundle is reproducible from `(seed, shape)` and independent of the
/// thread count.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseBundle {
    pub seed: u64,
    pub n_paths: usize,
    pub n_players: usize,
    pub d: usize,
    pub grid: TimeGrid,
    /// `[path][step][player][dim]`, already scaled by `√Δt`.
    idiosyncratic: Vec<f64>,
    /// `[path][step][dim]`, already scaled by `√Δt`.
    common: Vec<f64>,
    /// `[path][player][dim]` standard normals for initial draws.
    init_normals: Vec<f64>,
    /// `[path][player]` uniforms on `[0, 1)` for particle-cloud draws.
    init_uniforms: Vec<f64>,
}

/// Identifies a bundle by seed, shape and a checksum of its contents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseFingerprint {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub n_players: usize,
    pub d: usize,
    pub checksum: String,
}

/// Draws the noise for `game` on its own time grid.
pub fn sample_noise(game: &GameSpec, n_paths: usize, seed: u64) -> Result<NoiseBundle> {
    NoiseBundle::generate(game.n, game.d, game.grid, n_paths, seed)
}

impl NoiseBundle {
    pub fn generate(n_players: usize, d: usize, grid: TimeGrid, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(GameError::config("n_paths must be at least 1"));
        }
        if grid.n_steps == 0 {
            return Err(GameError::config("noise requires a grid with at least one step"));
        }
        if n_players == 0 || d == 0 {
            return Err(GameError::config("noise requires n >= 1 and d >= 1"));
        }
        let steps = grid.n_steps;
        let nd = n_players * d;
        let sq = grid.dt().sqrt();
        #[allow(clippy::type_complexity)]
        let per_path: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p as u64);
                let normals: Vec<f64> = (0..nd).map(|_| rng.sample(StandardNormal)).collect();
                let uniforms: Vec<f64> = (0..n_players).map(|_| rng.random::<f64>()).collect();
                let mut idio = Vec::with_capacity(steps * nd);
                let mut common = Vec::with_capacity(steps * d);
                for _ in 0..steps {
                    for _ in 0..nd {
                        idio.push(sq * rng.sample::<f64, _>(StandardNormal));
                    }
                    for _ in 0..d {
                        common.push(sq * rng.sample::<f64, _>(StandardNormal));
                    }
                }
                (idio, common, normals, uniforms)
            })
            .collect();
        let mut bundle = NoiseBundle {
            seed,
            n_paths,
            n_players,
            d,
            grid,
            idiosyncratic: Vec::with_capacity(n_paths * steps * nd),
            common: Vec::with_capacity(n_paths * steps * d),
            init_normals: Vec::with_capacity(n_paths * nd),
            init_uniforms: Vec::with_capacity(n_paths * n_players),
        };
        for (idio, common, normals, uniforms) in per_path {
            bundle.idiosyncratic.extend(idio);
            bundle.common.extend(common);
            bundle.init_normals.extend(normals);
            bundle.init_uniforms.extend(uniforms);
        }
        Ok(bundle)
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    /// All players' idiosyncratic increments on `[t_k, t_{k+1}]`, length `n·d`.
    pub fn idiosyncratic(&self, path: usize, step: usize) -> &[f64] {
        let nd = self.n_players * self.d;
        let off = (path * self.grid.n_steps + step) * nd;
        &self.idiosyncratic[off..off + nd]
    }

    /// Common increment on `[t_k, t_{k+1}]`, length `d`.
    pub fn common(&self, path: usize, step: usize) -> &[f64] {
        let off = (path * self.grid.n_steps + step) * self.d;
        &self.common[off..off + self.d]
    }

    /// Standard normals for the initial draw, length `n·d`.
    pub fn init_normals(&self, path: usize) -> &[f64] {
        let nd = self.n_players * self.d;
        &self.init_normals[path * nd..(path + 1) * nd]
    }

    pub fn init_uniforms(&self, path: usize) -> &[f64] {
        &self.init_uniforms[path * self.n_players..(path + 1) * self.n_players]
    }

    /// Every idiosyncratic increment, for moment checks.
    pub fn all_idiosyncratic(&self) -> &[f64] {
        &self.idiosyncratic
    }

    /// The same Brownian paths on a grid `factor` times coarser (increments
    /// are summed, initial randomness is kept).
    pub fn coarsen(&self, factor: usize) -> Result<NoiseBundle> {
        let grid = self.grid.coarsen(factor)?;
        let nd = self.n_players * self.d;
        let fine = self.grid.n_steps;
        let coarse = grid.n_steps;
        let mut idio = vec![0.0; self.n_paths * coarse * nd];
        let mut common = vec![0.0; self.n_paths * coarse * self.d];
        for p in 0..self.n_paths {
            for k in 0..fine {
                let kc = k / factor;
                let dst = (p * coarse + kc) * nd;
                for (o, v) in idio[dst..dst + nd].iter_mut().zip(self.idiosyncratic(p, k)) {
                    *o += v;
                }
                let dst = (p * coarse + kc) * self.d;
                for (o, v) in common[dst..dst + self.d].iter_mut().zip(self.common(p, k)) {
                    *o += v;
                }
            }
        }
        Ok(NoiseBundle {
            seed: self.seed,
            n_paths: self.n_paths,
            n_players: self.n_players,
            d: self.d,
            grid,
            idiosyncratic: idio,
            common,
            init_normals: self.init_normals.clone(),
            init_uniforms: self.init_uniforms.clone(),
        })
    }

    /// FNV-1a over the bit patterns of every stored value.
    pub fn fingerprint(&self) -> NoiseFingerprint {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self
            .idiosyncratic
            .iter()
            .chain(&self.common)
            .chain(&self.init_normals)
            .chain(&self.init_uniforms)
        {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        NoiseFingerprint {
            seed: self.seed,
            n_paths: self.n_paths,
            n_steps: self.grid.n_steps,
            n_players: self.n_players,
            d: self.d,
            checksum: format!("{h:016x}"),
        }
    }
}
