use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const MAX_ISOLATED_RETRIES: usize = 64;

/// Interaction weights `w_ij`: hollow, non-negative, and either row-stochastic
/// or identically zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
}

/// Graph family accepted by [`build_weight_matrix`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `w_ij = 1/(n-1)` off the diagonal.
    Complete,
    /// Ring lattice where each vertex sees its `k` nearest neighbours.
    CirculantKRegular { k: usize },
    /// Undirected G(n, p) adjacency, row-normalised afterwards.
    ErdosRenyiNormalized { p: f64 },
    Zero,
    /// Row-major entries.
    Explicit { entries: Vec<f64> },
}

impl WeightMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let w = WeightMatrix { entries };
        w.validate()?;
        Ok(w)
    }

    pub fn zero(n: usize) -> Self {
        WeightMatrix {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(GameError::DimensionMismatch(format!(
                "weight data has {} entries, expected {}",
                data.len(),
                n * n
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }

    pub fn row_major(&self) -> Vec<f64> {
        crate::linalg::to_row_major(&self.entries)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.entries;
        if m.nrows() != m.ncols() {
            return Err(GameError::DimensionMismatch(format!(
                "weight matrix is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        if m.iter().any(|x| !x.is_finite()) {
            return Err(GameError::NonFinite("weight matrix entry".into()));
        }
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(GameError::config(format!("w[{i}][{i}] = {} is not zero", m[(i, i)])));
            }
            for j in 0..n {
                if m[(i, j)] < 0.0 {
                    return Err(GameError::config(format!("w[{i}][{j}] = {} is negative", m[(i, j)])));
                }
            }
        }
        if self.is_zero() {
            return Ok(());
        }
        for i in 0..n {
            let s: f64 = m.row(i).iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(GameError::config(format!("row {i} sums to {s}, expected 1")));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for WeightMatrix {
    type Error = GameError;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        let n = (data.len() as f64).sqrt().round() as usize;
        Self::from_row_major(n, &data)
    }
}

impl From<WeightMatrix> for Vec<f64> {
    fn from(w: WeightMatrix) -> Self {
        w.row_major()
    }
}

/// Builds an interaction matrix of the requested family. `seed` is only
/// consumed by the random families.
pub fn build_weight_matrix(kind: &WeightKind, n: usize, seed: u64) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(GameError::config("player count must be at least 1"));
    }
    match kind {
        WeightKind::Zero => Ok(WeightMatrix::zero(n)),
        WeightKind::Complete => {
            if n == 1 {
                return Ok(WeightMatrix::zero(1));
            }
            let v = 1.0 / (n - 1) as f64;
            let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { v });
            WeightMatrix::new(m)
        }
        WeightKind::CirculantKRegular { k } => {
            let k = *k;
            if k % 2 != 0 || k < 2 || k > n.saturating_sub(1) {
                return Err(GameError::config(format!(
                    "circulant degree k = {k} must be even with 2 <= k <= n-1 = {}",
                    n.saturating_sub(1)
                )));
            }
            let half = k / 2;
            let v = 1.0 / k as f64;
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for s in 1..=half {
                    m[(i, (i + s) % n)] = v;
                    m[(i, (i + n - s) % n)] = v;
                }
            }
            WeightMatrix::new(m)
        }
        WeightKind::ErdosRenyiNormalized { p } => {
            let p = *p;
            if !(p > 0.0 && p <= 1.0) {
                return Err(GameError::config(format!("edge probability {p} outside (0, 1]")));
            }
            if n == 1 {
                return Err(GameError::IsolatedVertex { vertex: 0, retries: 0 });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut adj = vec![vec![false; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = rng.random::<f64>() < p;
                    adj[i][j] = e;
                    adj[j][i] = e;
                }
            }
            for i in 0..n {
                let mut retries = 0;
                while !adj[i].iter().any(|&e| e) {
                    if retries == MAX_ISOLATED_RETRIES {
                        return Err(GameError::IsolatedVertex { vertex: i, retries });
                    }
                    retries += 1;
                    for j in 0..n {
                        if j != i {
                            let e = rng.random::<f64>() < p;
                            adj[i][j] = e;
                            adj[j][i] = e;
                        }
                    }
                }
            }
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                let deg = adj[i].iter().filter(|&&e| e).count() as f64;
                for j in 0..n {
                    if adj[i][j] {
                        m[(i, j)] = 1.0 / deg;
                    }
                }
            }
            WeightMatrix::new(m)
        }
        WeightKind::Explicit { entries } => WeightMatrix::from_row_major(n, entries),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_valid(w: &WeightMatrix) {
        let n = w.n();
        let zero = w.is_zero();
        for i in 0..n {
            assert_eq!(w.get(i, i), 0.0);
            let mut s = 0.0;
            for j in 0..n {
                assert!(w.get(i, j) >= 0.0);
                s += w.get(i, j);
            }
            if !zero {
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn complete_three() {
        let w = build_weight_matrix(&WeightKind::Complete, 3, 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w.get(i, j), if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn zero_five() {
        let w = build_weight_matrix(&WeightKind::Zero, 5, 0).unwrap();
        assert_eq!(w.n(), 5);
        assert!(w.is_zero());
    }

    #[test]
    fn ring_of_six() {
        let w = build_weight_matrix(&WeightKind::CirculantKRegular { k: 2 }, 6, 0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let neighbour = j == (i + 1) % 6 || j == (i + 5) % 6;
                assert_eq!(w.get(i, j), if neighbour { 0.5 } else { 0.0 });
            }
        }
    }

    #[test]
    fn circulant_rejects_odd_degree() {
        assert!(matches!(
            build_weight_matrix(&WeightKind::CirculantKRegular { k: 3 }, 8, 0),
            Err(GameError::Config(_))
        ));
        assert!(build_weight_matrix(&WeightKind::CirculantKRegular { k: 6 }, 6, 0).is_err());
    }

    #[test]
    fn erdos_renyi_is_asymmetric_after_normalisation() {
        let w = build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p: 0.3 }, 20, 11).unwrap();
        assert_valid(&w);
        let asym = (0..20).any(|i| (0..20).any(|j| (w.get(i, j) - w.get(j, i)).abs() > 1e-12));
        assert!(asym);
    }

    #[test]
    fn erdos_renyi_isolated_vertex_is_reported() {
        let err = build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p: 1e-9 }, 4, 3).unwrap_err();
        assert!(matches!(err, GameError::IsolatedVertex { vertex: 0, .. }));
        assert!(build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p: 0.0 }, 4, 3).is_err());
    }

    #[test]
    fn explicit_rejects_bad_rows() {
        let bad = WeightKind::Explicit { entries: vec![0.0, 0.5, 1.0, 0.0] };
        assert!(build_weight_matrix(&bad, 2, 0).is_err());
        let diag = WeightKind::Explicit { entries: vec![1.0, 0.0, 1.0, 0.0] };
        assert!(build_weight_matrix(&diag, 2, 0).is_err());
    }

    proptest! {
        #[test]
        fn builders_satisfy_invariants(n in 3usize..24, half in 1usize..6, p in 0.2f64..1.0, seed in 0u64..1000) {
            assert_valid(&build_weight_matrix(&WeightKind::Complete, n, seed).unwrap());
            assert_valid(&build_weight_matrix(&WeightKind::Zero, n, seed).unwrap());
            let k = 2 * half;
            if k < n {
                assert_valid(&build_weight_matrix(&WeightKind::CirculantKRegular { k }, n, seed).unwrap());
            }
            if let Ok(w) = build_weight_matrix(&WeightKind::ErdosRenyiNormalized { p }, n, seed) {
                assert_valid(&w);
            }
        }
    }
}
