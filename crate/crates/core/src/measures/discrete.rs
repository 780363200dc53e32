use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::WeightMatrix;

const MASS_TOL: f64 = 1e-10;

/// Finite non-negative measure `Σ_k weights[k] δ_{atoms[k]}` on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    mass: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(GameError::DimensionMismatch(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(GameError::config("measure has no atoms"));
        }
        let d = atoms[0].len();
        if d == 0 || atoms.iter().any(|a| a.len() != d) {
            return Err(GameError::DimensionMismatch("atoms must share a positive dimension".into()));
        }
        if atoms.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GameError::NonFinite("atom coordinate".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(GameError::config("measure weights must be finite and non-negative"));
        }
        let mass = weights.iter().sum();
        Ok(DiscreteMeasure { atoms, weights, mass })
    }

    /// Probability measure with equal weights.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / atoms.len().max(1) as f64;
        let n = atoms.len();
        Self::new(atoms, vec![w; n])
    }

    /// One-dimensional measure from scalar atoms.
    pub fn from_points_1d(points: &[f64], weights: Vec<f64>) -> Result<Self> {
        Self::new(points.iter().map(|&p| vec![p]).collect(), weights)
    }

    /// Weighted empirical measure `Σ_j w_ij δ_{x^j}` seen by player `i`.
    pub fn weighted_empirical(w: &WeightMatrix, i: usize, x: &[f64], d: usize) -> Result<Self> {
        let n = w.n();
        if x.len() != n * d {
            return Err(GameError::DimensionMismatch(format!("state has length {}, expected {}", x.len(), n * d)));
        }
        let atoms = (0..n).map(|j| x[j * d..(j + 1) * d].to_vec()).collect();
        let weights = (0..n).map(|j| w.get(i, j)).collect();
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atoms with positive weight.
    pub(crate) fn support(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.atoms.iter().zip(&self.weights).filter(|(_, &w)| w > 0.0).map(|(a, &w)| (a.as_slice(), w))
    }
}

pub(crate) fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(GameError::config(format!("Wasserstein order r = {r} must be >= 1")));
    }
    if mu.dim() != nu.dim() {
        return Err(GameError::DimensionMismatch(format!("measures live in R^{} and R^{}", mu.dim(), nu.dim())));
    }
    if (mu.mass - nu.mass).abs() > MASS_TOL * mu.mass.max(nu.mass).max(1.0) {
        return Err(GameError::config(format!("mass mismatch: {} vs {}", mu.mass, nu.mass)));
    }
    Ok(())
}

/// Exact `W_r` on the line through the monotone (quantile) coupling.
pub fn wasserstein_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r: f64) -> Result<f64> {
    check_pair(mu, nu, r)?;
    if mu.dim() != 1 {
        return Err(GameError::DimensionMismatch(format!("wasserstein_1d needs d = 1, got {}", mu.dim())));
    }
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m.support().map(|(a, w)| (a[0], w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    Ok(quantile_cost(&sorted(mu), &sorted(nu), r).powf(1.0 / r))
}

/// `∫ |F⁻¹ − G⁻¹|^r` for sorted `(position, weight)` lists of equal mass.
pub(crate) fn quantile_cost(a: &[(f64, f64)], b: &[(f64, f64)], r: f64) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.first().map_or(0.0, |p| p.1), b.first().map_or(0.0, |p| p.1));
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        let gap = (a[i].0 - b[j].0).abs();
        if gap > 0.0 {
            total += m * if r == 1.0 { gap } else { gap.powf(r) };
        }
        ra -= m;
        rb -= m;
        // Advance whichever side is exhausted; on a tie advance both.
        let adv_a = ra <= rb;
        let adv_b = rb <= ra;
        if adv_a {
            i += 1;
            if i < a.len() {
                ra = a[i].1;
            }
        }
        if adv_b {
            j += 1;
            if j < b.len() {
                rb = b[j].1;
            }
        }
    }
    total
}
