use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hamiltonian::Hamiltonian;
use super::weights::WeightMatrix;
use crate::error::{GameError, Result};

/// Bounded smooth scalar maps available to [`CostModel::PhiNetwork`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiKind {
    Tanh,
    /// `φ(x) = s·atan(x/s)`: identity near the origin, flattening to `±sπ/2`.
    ScaledArctan { scale: f64 },
}

/// Sup norms of `φ`, `φ'` and `φ''`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiBounds {
    pub sup: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
}

impl PhiKind {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PhiKind::Tanh => x.tanh(),
            PhiKind::ScaledArctan { scale } => scale * (x / scale).atan(),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            PhiKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            PhiKind::ScaledArctan { scale } => {
                let u = x / scale;
                1.0 / (1.0 + u * u)
            }
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            PhiKind::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            PhiKind::ScaledArctan { scale } => {
                let u = x / scale;
                let q = 1.0 + u * u;
                -2.0 * u / (scale * q * q)
            }
        }
    }

    /// Analytic sup norms, certified per catalog entry.
    pub fn bounds(&self) -> PhiBounds {
        match *self {
            // |tanh''| peaks at tanh² = 1/3.
            PhiKind::Tanh => PhiBounds {
                sup: 1.0,
                sup_d1: 1.0,
                sup_d2: 4.0 / (3.0 * 3f64.sqrt()),
            },
            // |φ''| peaks at u² = 1/3.
            PhiKind::ScaledArctan { scale } => PhiBounds {
                sup: scale * std::f64::consts::FRAC_PI_2,
                sup_d1: 1.0,
                sup_d2: 3.0 * 3f64.sqrt() / (8.0 * scale),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if let PhiKind::ScaledArctan { scale } = *self {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(GameError::config(format!("arctan scale {scale} must be positive")));
            }
        }
        Ok(())
    }
}

/// User-supplied cost evaluators. States are flat slices of length `n·d`,
/// player `j` occupying `x[j*d..(j+1)*d]`.
pub trait CostEvaluator: Send + Sync + fmt::Debug {
    fn running(&self, i: usize, x: &[f64]) -> f64;
    fn terminal(&self, i: usize, x: &[f64]) -> f64;
    /// `D_{x^j} F^i(x)`, length `d`.
    fn running_gradient(&self, i: usize, j: usize, x: &[f64]) -> Vec<f64>;
    /// `D_{x^j} G^i(x)`, length `d`.
    fn terminal_gradient(&self, i: usize, j: usize, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug)]
pub struct CustomModel {
    pub costs: Arc<dyn CostEvaluator>,
    pub hamiltonian: Arc<dyn Hamiltonian>,
}

/// Cost structure of the game. The Lagrangian of the built-in models is
/// `L(x, a) = |a|²/2`.
#[derive(Clone, Debug)]
pub enum CostModel {
    /// `F^i(x) = q_f/2 |x^i|² + a_f/2 |x^i − Σ_j w_ij x^j|²`, `G^i` alike.
    LqNetwork { a_f: f64, a_g: f64, q_f: f64, q_g: f64 },
    /// `F^i(x) = A/2 (φ(x^i) − Σ_j w_ij φ(x^j))²` with `G^i = F^i`, `d = 1`.
    PhiNetwork { a: f64, phi: PhiKind },
    Custom(CustomModel),
}

/// Serializable view of the built-in models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum CostModelDoc {
    LqNetwork { a_f: f64, a_g: f64, q_f: f64, q_g: f64 },
    PhiNetwork { a: f64, phi: PhiKind },
}

impl From<CostModelDoc> for CostModel {
    fn from(doc: CostModelDoc) -> Self {
        match doc {
            CostModelDoc::LqNetwork { a_f, a_g, q_f, q_g } => CostModel::LqNetwork { a_f, a_g, q_f, q_g },
            CostModelDoc::PhiNetwork { a, phi } => CostModel::PhiNetwork { a, phi },
        }
    }
}

impl TryFrom<&CostModel> for CostModelDoc {
    type Error = GameError;

    fn try_from(m: &CostModel) -> Result<Self> {
        match *m {
            CostModel::LqNetwork { a_f, a_g, q_f, q_g } => Ok(CostModelDoc::LqNetwork { a_f, a_g, q_f, q_g }),
            CostModel::PhiNetwork { a, phi } => Ok(CostModelDoc::PhiNetwork { a, phi }),
            CostModel::Custom(_) => Err(GameError::Unsupported("custom cost models cannot be serialized".into())),
        }
    }
}

/// Coefficients of an isotropic LQ network model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LqCoefficients {
    pub a_f: f64,
    pub a_g: f64,
    pub q_f: f64,
    pub q_g: f64,
}

impl CostModel {
    pub fn lq(a_f: f64, a_g: f64, q_f: f64, q_g: f64) -> Self {
        CostModel::LqNetwork { a_f, a_g, q_f, q_g }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CostModel::LqNetwork { .. } => "lq_network",
            CostModel::PhiNetwork { .. } => "phi_network",
            CostModel::Custom(_) => "custom",
        }
    }

    pub fn lq_coefficients(&self) -> Option<LqCoefficients> {
        match *self {
            CostModel::LqNetwork { a_f, a_g, q_f, q_g } => Some(LqCoefficients { a_f, a_g, q_f, q_g }),
            _ => None,
        }
    }

    pub fn phi_bounds(&self) -> Option<PhiBounds> {
        match self {
            CostModel::PhiNetwork { phi, .. } => Some(phi.bounds()),
            _ => None,
        }
    }

    pub(crate) fn validate(&self, d: usize) -> Result<()> {
        match self {
            CostModel::LqNetwork { a_f, a_g, q_f, q_g } => {
                if ![a_f, a_g, q_f, q_g].iter().all(|v| v.is_finite()) {
                    return Err(GameError::NonFinite("LQ coefficient".into()));
                }
            }
            CostModel::PhiNetwork { a, phi } => {
                if d != 1 {
                    return Err(GameError::DimensionMismatch(format!(
                        "phi_network requires d = 1, got d = {d}"
                    )));
                }
                if !a.is_finite() {
                    return Err(GameError::NonFinite("phi strength".into()));
                }
                phi.validate()?;
            }
            CostModel::Custom(_) => {}
        }
        Ok(())
    }

    /// `D_{x^i} F^i(x)` (running) or `D_{x^i} G^i(x)` (terminal).
    pub fn own_gradient(&self, w: &WeightMatrix, d: usize, i: usize, x: &[f64], terminal: bool, out: &mut [f64]) {
        match *self {
            CostModel::LqNetwork { a_f, a_g, q_f, q_g } => {
                let (a, q) = if terminal { (a_g, q_g) } else { (a_f, q_f) };
                let n = w.n();
                for k in 0..d {
                    let xi = x[i * d + k];
                    let mut avg = 0.0;
                    for j in 0..n {
                        avg += w.get(i, j) * x[j * d + k];
                    }
                    out[k] = q * xi + a * (xi - avg);
                }
            }
            CostModel::PhiNetwork { a, phi } => {
                let r = phi_residual(phi, w, i, x);
                out[0] = a * r * phi.d1(x[i]);
            }
            CostModel::Custom(ref c) => {
                let g = if terminal {
                    c.costs.terminal_gradient(i, i, x)
                } else {
                    c.costs.running_gradient(i, i, x)
                };
                out.copy_from_slice(&g);
            }
        }
    }

    /// `D_{x^j} F^i(x)` for any `j`.
    #[allow(clippy::too_many_arguments)]
    pub fn cross_gradient(&self, w: &WeightMatrix, d: usize, i: usize, j: usize, x: &[f64], terminal: bool, out: &mut [f64]) {
        if i == j {
            self.own_gradient(w, d, i, x, terminal, out);
            return;
        }
        match *self {
            CostModel::LqNetwork { a_f, a_g, .. } => {
                let a = if terminal { a_g } else { a_f };
                let n = w.n();
                for k in 0..d {
                    let mut avg = 0.0;
                    for l in 0..n {
                        avg += w.get(i, l) * x[l * d + k];
                    }
                    out[k] = -a * (x[i * d + k] - avg) * w.get(i, j);
                }
            }
            CostModel::PhiNetwork { a, phi } => {
                let r = phi_residual(phi, w, i, x);
                out[0] = -a * r * w.get(i, j) * phi.d1(x[j]);
            }
            CostModel::Custom(ref c) => {
                let g = if terminal {
                    c.costs.terminal_gradient(i, j, x)
                } else {
                    c.costs.running_gradient(i, j, x)
                };
                out.copy_from_slice(&g);
            }
        }
    }

    /// `F^i(x)` or `G^i(x)`.
    pub fn cost(&self, w: &WeightMatrix, d: usize, i: usize, x: &[f64], terminal: bool) -> f64 {
        match *self {
            CostModel::LqNetwork { a_f, a_g, q_f, q_g } => {
                let (a, q) = if terminal { (a_g, q_g) } else { (a_f, q_f) };
                let n = w.n();
                let mut own = 0.0;
                let mut dev = 0.0;
                for k in 0..d {
                    let xi = x[i * d + k];
                    let mut avg = 0.0;
                    for j in 0..n {
                        avg += w.get(i, j) * x[j * d + k];
                    }
                    own += xi * xi;
                    dev += (xi - avg) * (xi - avg);
                }
                0.5 * q * own + 0.5 * a * dev
            }
            CostModel::PhiNetwork { a, phi } => {
                let r = phi_residual(phi, w, i, x);
                0.5 * a * r * r
            }
            CostModel::Custom(ref c) => {
                if terminal {
                    c.costs.terminal(i, x)
                } else {
                    c.costs.running(i, x)
                }
            }
        }
    }
}

/// `φ(x^i) − Σ_j w_ij φ(x^j)` for `d = 1`.
pub(crate) fn phi_residual(phi: PhiKind, w: &WeightMatrix, i: usize, x: &[f64]) -> f64 {
    let mut avg = 0.0;
    for (j, &xj) in x.iter().enumerate() {
        let wij = w.get(i, j);
        if wij != 0.0 {
            avg += wij * phi.eval(xj);
        }
    }
    phi.eval(x[i]) - avg
}

/// `M = q·I + a·(I − w)`: the matrix of the diagonal gradient field
/// `x ↦ (D_{x^i} F^i(x))_i` of an LQ network model (per coordinate).
pub fn lq_gradient_matrix(a: f64, q: f64, w: &WeightMatrix) -> DMatrix<f64> {
    let n = w.n();
    let mut m = w.matrix() * (-a);
    for i in 0..n {
        m[(i, i)] += q + a;
    }
    m
}

/// Full Hessian `S^i` of `x ↦ q/2 x_i² + a/2 ((e_i − w_i·)·x)²` (per coordinate).
pub fn lq_player_hessian(a: f64, q: f64, w: &WeightMatrix, i: usize) -> DMatrix<f64> {
    let n = w.n();
    let mut v = nalgebra::DVector::from_fn(n, |j, _| -w.get(i, j));
    v[i] += 1.0;
    let mut s = &v * v.transpose() * a;
    s[(i, i)] += q;
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::weights::{build_weight_matrix, WeightKind};
    use proptest::prelude::*;

    fn random_stochastic(n: usize, raw: &[f64]) -> WeightMatrix {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if i != j {
                    m[(i, j)] = raw[(i * n + j) % raw.len()] + 0.01;
                    s += m[(i, j)];
                }
            }
            for j in 0..n {
                m[(i, j)] /= s;
            }
        }
        // Rounding in the division can leave row sums a few ulps off 1.
        WeightMatrix::new(m).unwrap()
    }

    #[test]
    fn tanh_bounds() {
        let b = PhiKind::Tanh.bounds();
        assert_eq!(b.sup, 1.0);
        assert_eq!(b.sup_d1, 1.0);
        let grid_max = (0..20001)
            .map(|k| PhiKind::Tanh.d2(-5.0 + k as f64 * 5e-4).abs())
            .fold(0.0, f64::max);
        assert!(grid_max <= b.sup_d2 + 1e-12 && b.sup_d2 - grid_max < 1e-6);
    }

    #[test]
    fn arctan_bounds() {
        let phi = PhiKind::ScaledArctan { scale: 2.0 };
        let b = phi.bounds();
        let grid_max = (0..40001)
            .map(|k| phi.d2(-10.0 + k as f64 * 5e-4).abs())
            .fold(0.0, f64::max);
        assert!(grid_max <= b.sup_d2 + 1e-12 && b.sup_d2 - grid_max < 1e-6);
        assert!(phi.eval(1e12) < b.sup);
    }

    proptest! {
        #[test]
        fn lq_hessian_matches_finite_differences(
            n in 2usize..=8,
            raw in proptest::collection::vec(0.0f64..1.0, 64),
            a in -2.0f64..2.0,
            q in -2.0f64..2.0,
            x in proptest::collection::vec(-3.0f64..3.0, 8),
        ) {
            let w = random_stochastic(n, &raw);
            let model = CostModel::lq(a, a, q, q);
            let mf = lq_gradient_matrix(a, q, &w);
            let x = &x[..n];
            let h = 1e-3;
            let mut gp = vec![0.0; 1];
            let mut gm = vec![0.0; 1];
            for i in 0..n {
                for j in 0..n {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[j] += h;
                    xm[j] -= h;
                    model.own_gradient(&w, 1, i, &xp, false, &mut gp);
                    model.own_gradient(&w, 1, i, &xm, false, &mut gm);
                    let fd = (gp[0] - gm[0]) / (2.0 * h);
                    let exact = mf[(i, j)];
                    let scale = exact.abs().max(1.0);
                    prop_assert!((fd - exact).abs() / scale < 1e-8, "fd {} exact {}", fd, exact);
                }
            }
        }

        #[test]
        fn phi_gradient_matches_finite_differences(
            n in 2usize..=8,
            raw in proptest::collection::vec(0.0f64..1.0, 64),
            a in -2.0f64..2.0,
            x in proptest::collection::vec(-3.0f64..3.0, 8),
            arctan in proptest::bool::ANY,
        ) {
            let w = random_stochastic(n, &raw);
            let phi = if arctan { PhiKind::ScaledArctan { scale: 1.5 } } else { PhiKind::Tanh };
            let model = CostModel::PhiNetwork { a, phi };
            let x = &x[..n];
            let h = 1e-5;
            let mut g = vec![0.0; 1];
            for i in 0..n {
                for j in 0..n {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[j] += h;
                    xm[j] -= h;
                    let fd = (model.cost(&w, 1, i, &xp, false) - model.cost(&w, 1, i, &xm, false)) / (2.0 * h);
                    model.cross_gradient(&w, 1, i, j, x, false, &mut g);
                    prop_assert!((fd - g[0]).abs() < 1e-6, "i {} j {} fd {} exact {}", i, j, fd, g[0]);
                }
            }
        }
    }

    #[test]
    fn player_hessian_agrees_with_cost() {
        let w = build_weight_matrix(&WeightKind::Complete, 4, 0).unwrap();
        let (a, q) = (0.7, 1.3);
        let model = CostModel::lq(a, a, q, q);
        let x = [0.3, -1.2, 2.0, 0.5];
        for i in 0..4 {
            let s = lq_player_hessian(a, q, &w, i);
            let xv = nalgebra::DVector::from_row_slice(&x);
            let quad = 0.5 * (xv.transpose() * &s * &xv)[(0, 0)];
            assert!((quad - model.cost(&w, 1, i, &x, false)).abs() < 1e-12);
        }
    }
}
