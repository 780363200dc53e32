use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Success once the max-norm residual drops below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative forward-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iters: 50,
            fd_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton with a forward-difference Jacobian for `F(x) = 0`.
pub fn newton_solve<F>(x0: &[f64], f: F, opts: &NewtonOptions, solver: &'static str) -> Result<NewtonResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut norm = max_abs(&r);
    if !norm.is_finite() {
        return Err(GameError::NonFinite(format!("{solver} residual at the initial guess")));
    }
    for it in 0..opts.max_iters {
        if norm < opts.tol {
            return Ok(NewtonResult { x, residual: norm, iterations: it });
        }
        let mut jac = DMatrix::zeros(r.len(), m);
        for j in 0..m {
            let h = opts.fd_step * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let rp = f(&xp);
            for i in 0..r.len() {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let sv = jac.singular_values();
        let (smax, smin) = sv.iter().fold((0.0_f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
        if !(smin > 1e-12 * smax) {
            return Err(GameError::Singular(format!("{solver} Jacobian is singular (condition > 1e12)")));
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = jac
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| GameError::Singular(format!("{solver} Jacobian is singular")))?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let rt = f(&trial);
            let nt = max_abs(&rt);
            if nt.is_finite() && (nt < norm || t < 1e-3) {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            t *= 0.5;
        }
    }
    if norm < opts.tol {
        return Ok(NewtonResult { x, residual: norm, iterations: opts.max_iters });
    }
    Err(GameError::NotConverged {
        solver,
        iterations: opts.max_iters,
        delta: norm,
    })
}
