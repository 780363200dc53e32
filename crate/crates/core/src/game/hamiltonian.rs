use std::fmt;

use crate::error::{GameError, Result};

/// Hamiltonian `H(x, p) = sup_a (−a·p − L(x, a))` of one player together with
/// the derivatives the solvers need.
pub trait Hamiltonian: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], p: &[f64]) -> f64;
    /// `D_p H(x, p)`; the optimal control is `−D_p H`.
    fn d_p(&self, x: &[f64], p: &[f64], out: &mut [f64]);
    fn d_x(&self, x: &[f64], p: &[f64], out: &mut [f64]);
    /// `D_pp H(x, p)` as a row-major `d×d` block.
    fn d_pp(&self, x: &[f64], p: &[f64], out: &mut [f64]);
    /// Uniform lower bound on `D_pp H`.
    fn convexity_floor(&self) -> f64;
    /// Growth constant `C_H` with `|D_x H| ≤ C_H (1 + |p|)`.
    fn growth_constant(&self) -> f64;
}

/// `H(x, p) = |p|²/2`, the transform of `L(x, a) = |a|²/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuadraticHamiltonian;

impl Hamiltonian for QuadraticHamiltonian {
    fn value(&self, _x: &[f64], p: &[f64]) -> f64 {
        0.5 * p.iter().map(|v| v * v).sum::<f64>()
    }

    fn d_p(&self, _x: &[f64], p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(p);
    }

    fn d_x(&self, _x: &[f64], _p: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn d_pp(&self, _x: &[f64], p: &[f64], out: &mut [f64]) {
        let d = p.len();
        out.fill(0.0);
        for k in 0..d {
            out[k * d + k] = 1.0;
        }
    }

    fn convexity_floor(&self) -> f64 {
        1.0
    }

    fn growth_constant(&self) -> f64 {
        0.0
    }
}

/// `L(x, a) = |a|²/2`.
pub fn quadratic_lagrangian(_x: &[f64], a: &[f64]) -> f64 {
    0.5 * a.iter().map(|v| v * v).sum::<f64>()
}

/// Uniform action grid `[-radius, radius]^d` with `points` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionGrid {
    pub radius: f64,
    pub points: usize,
}

impl ActionGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.points - 1) as f64
    }
}

impl Default for ActionGrid {
    fn default() -> Self {
        ActionGrid { radius: 10.0, points: 20001 }
    }
}

/// Result of a brute-force Legendre transform at one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LegendrePoint {
    pub h_grid: f64,
    pub maximizer: Vec<f64>,
}

/// Maximizes `−a·p − L(x, a)` over the action grid.
pub fn legendre_grid<L>(lagrangian: &L, x: &[f64], p: &[f64], grid: &ActionGrid) -> Result<LegendrePoint>
where
    L: Fn(&[f64], &[f64]) -> f64,
{
    let d = p.len();
    if grid.points < 2 || !(grid.radius > 0.0) {
        return Err(GameError::config("action grid needs radius > 0 and at least 2 points"));
    }
    let total = grid.points.checked_pow(d as u32).filter(|&t| t <= 50_000_000).ok_or_else(|| {
        GameError::config(format!("action grid with {} points in dimension {d} is too large", grid.points))
    })?;
    let h = grid.spacing();
    let mut a = vec![0.0; d];
    let mut best = f64::NEG_INFINITY;
    let mut arg = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for ak in a.iter_mut() {
            *ak = -grid.radius + (rem % grid.points) as f64 * h;
            rem /= grid.points;
        }
        let l = lagrangian(x, &a);
        if !l.is_finite() {
            return Err(GameError::NonFinite(format!("lagrangian at a = {a:?}")));
        }
        let v = -a.iter().zip(p).map(|(ak, pk)| ak * pk).sum::<f64>() - l;
        if v > best {
            best = v;
            arg.copy_from_slice(&a);
        }
    }
    Ok(LegendrePoint { h_grid: best, maximizer: arg })
}

/// `max_s |H(x_s, p_s) − max_a (−a·p_s − L(x_s, a))|` over the samples.
pub fn legendre_residual<L>(ham: &dyn Hamiltonian, lagrangian: &L, samples: &[(Vec<f64>, Vec<f64>)], grid: &ActionGrid) -> Result<f64>
where
    L: Fn(&[f64], &[f64]) -> f64,
{
    let mut worst = 0.0_f64;
    for (x, p) in samples {
        let h = ham.value(x, p);
        if !h.is_finite() {
            return Err(GameError::NonFinite(format!("hamiltonian at x = {x:?}, p = {p:?}")));
        }
        let g = legendre_grid(lagrangian, x, p, grid)?;
        worst = worst.max((h - g.h_grid).abs());
    }
    Ok(worst)
}

/// Smallest eigenvalue of `D_pp H` over the samples.
pub fn sampled_convexity(ham: &dyn Hamiltonian, samples: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut lo = f64::INFINITY;
    for (x, p) in samples {
        let d = p.len();
        let mut block = vec![0.0; d * d];
        ham.d_pp(x, p, &mut block);
        let m = nalgebra::DMatrix::from_row_slice(d, d, &block);
        lo = lo.min(crate::linalg::sym_min_eig(&m));
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_transform_at_origin_is_exact() {
        let r = legendre_residual(
            &QuadraticHamiltonian,
            &quadratic_lagrangian,
            &[(vec![0.0], vec![0.0])],
            &ActionGrid::default(),
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn quadratic_transform_matches_closed_form() {
        let grid = ActionGrid::default();
        let samples = vec![(vec![0.0], vec![0.0]), (vec![1.0], vec![2.0]), (vec![-3.0], vec![-0.37])];
        let r = legendre_residual(&QuadraticHamiltonian, &quadratic_lagrangian, &samples, &grid).unwrap();
        assert!(r <= grid.spacing().powi(2), "residual {r}");
        assert!(r < 1e-6);

        let pt = legendre_grid(&quadratic_lagrangian, &[0.0], &[2.0], &grid).unwrap();
        assert!((pt.h_grid - 2.0).abs() < 1e-12);
        assert!((pt.maximizer[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_transform() {
        let grid = ActionGrid { radius: 4.0, points: 801 };
        let samples = vec![(vec![0.0, 0.0], vec![1.0, -0.5])];
        let r = legendre_residual(&QuadraticHamiltonian, &quadratic_lagrangian, &samples, &grid).unwrap();
        assert!(r < 1e-6);
    }

    #[test]
    fn nan_lagrangian_rejected() {
        let bad = |_x: &[f64], _a: &[f64]| f64::NAN;
        let err = legendre_residual(&QuadraticHamiltonian, &bad, &[(vec![0.0], vec![1.0])], &ActionGrid::default());
        assert!(matches!(err, Err(GameError::NonFinite(_))));
    }

    #[test]
    fn convexity_floor_holds() {
        let samples: Vec<_> = (0..10).map(|k| (vec![k as f64], vec![k as f64 - 5.0, 1.0])).collect();
        assert!(sampled_convexity(&QuadraticHamiltonian, &samples) >= QuadraticHamiltonian.convexity_floor() - 1e-14);
    }
}
