use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(GameError::config(format!("rate argument K = {k} must be positive")))
    }
}

/// `ρ_d(K)`: `K^{-1/2}` for `d < 4`, `K^{-1/2}|log K|` for `d = 4`,
/// `K^{-2/d}` for `d > 4`.
pub fn rho_rate(d: usize, k: f64) -> Result<f64> {
    check_k(k)?;
    if d == 0 {
        return Err(GameError::config("dimension must be >= 1"));
    }
    Ok(match d {
        1..=3 => k.powf(-0.5),
        4 => k.powf(-0.5) * k.ln().abs(),
        _ => k.powf(-2.0 / d as f64),
    })
}

/// `ρ_{d,q,r}(K)` of the weighted empirical-measure estimate; the cases the
/// estimate does not cover are rejected.
pub fn rho_rate_full(d: usize, q: f64, r: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    if d == 0 {
        return Err(GameError::config("dimension must be >= 1"));
    }
    if !(r > 0.0 && r < q && q.is_finite()) {
        return Err(GameError::config(format!("need 0 < r < q, got r = {r}, q = {q}")));
    }
    let half_d = d as f64 / 2.0;
    let tail = k.powf(-(q - r) / q);
    let unsupported = |why: &str| Err(GameError::Unsupported(format!("rho_{{{d},{q},{r}}}: {why}")));
    if r > half_d {
        if q == 2.0 * r {
            return unsupported("q = 2r is not covered when r > d/2");
        }
        Ok(k.powf(-0.5) + tail)
    } else if r == half_d {
        if q == 2.0 * r {
            return unsupported("q = 2r is not covered when r = d/2");
        }
        Ok(k.powf(-0.5) * k.ln_1p() + tail)
    } else {
        if q == d as f64 / (d as f64 - r) {
            return unsupported("q = d/(d − r) is not covered when r < d/2");
        }
        Ok(k.powf(-r / d as f64) + tail)
    }
}

/// Least-squares fit of `log y = intercept + slope · log x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(GameError::DimensionMismatch(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(GameError::config(format!("rate fit needs at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(GameError::config("rate fit needs positive finite samples"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(GameError::Singular("rate fit abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { xs: xs.to_vec(), ys: ys.to_vec(), slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn catalog_values() {
        assert_abs_diff_eq!(rho_rate(1, 100.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_rate(5, 32.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_rate(4, 100.0).unwrap(), 0.1 * 100f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(rho_rate_full(1, 4.0, 1.0, 16.0).unwrap(), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_rate_full(2, 3.0, 1.0, 9.0).unwrap(), 9f64.powf(-0.5) * 10f64.ln() + 9f64.powf(-2.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(rho_rate_full(6, 3.0, 1.0, 64.0).unwrap(), 0.5 + 64f64.powf(-2.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn excluded_cases() {
        assert!(matches!(rho_rate_full(1, 2.0, 1.0, 4.0), Err(GameError::Unsupported(_))));
        assert!(matches!(rho_rate_full(2, 2.0, 1.0, 4.0), Err(GameError::Unsupported(_))));
        assert!(matches!(rho_rate_full(3, 1.5, 1.0, 4.0), Err(GameError::Unsupported(_))));
        assert!(matches!(rho_rate_full(1, 1.0, 2.0, 4.0), Err(GameError::Config(_))));
        assert!(rho_rate(1, 0.0).is_err());
    }

    #[test]
    fn fit_recovers_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let f = fit_loglog(&xs, &ys).unwrap();
        assert_abs_diff_eq!(f.slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
        assert!(fit_loglog(&xs[..2], &ys[..2]).is_err());
    }

    #[test]
    fn fit_satisfies_normal_equations() {
        let xs = [1.0, 3.0, 7.0, 20.0, 55.0];
        let ys = [2.0, 1.1, 0.9, 0.3, 0.25];
        let f = fit_loglog(&xs, &ys).unwrap();
        let (mut r0, mut r1) = (0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            let e = y.ln() - f.intercept - f.slope * x.ln();
            r0 += e;
            r1 += e * x.ln();
        }
        assert!(r0.abs() < 1e-12 && r1.abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rho_decreasing(d in 1usize..9, k in 1.0f64..1e6, step in 1.001f64..10.0) {
            // d = 4 is decreasing only past K = e².
            let k = if d == 4 { k + 7.4 } else { k };
            prop_assert!(rho_rate(d, k * step).unwrap() < rho_rate(d, k).unwrap());
        }

        #[test]
        fn rho_full_decreasing(k in 1.0f64..1e6, step in 1.001f64..10.0) {
            for (d, q, r) in [(1usize, 4.0, 1.0), (1, 3.0, 2.0), (3, 5.0, 1.0), (6, 4.0, 2.0)] {
                prop_assert!(rho_rate_full(d, q, r, k * step).unwrap() < rho_rate_full(d, q, r, k).unwrap());
            }
            // r = d/2 branch: K^{-1/2} log(1+K) decreases once K ≳ 3.92.
            let k2 = k + 4.0;
            prop_assert!(rho_rate_full(2, 3.0, 1.0, k2 * step).unwrap() < rho_rate_full(2, 3.0, 1.0, k2).unwrap());
        }
    }
}
