use crate::error::{GameError, Result};
use crate::game::{InitialLaw, LawComponent};

/// Poincaré constant `C_P` (with `Var g ≤ C_P E|Dg|²`) of a catalog law.
pub fn poincare_constant(law: &InitialLaw) -> Result<f64> {
    let component = |c: &LawComponent| match c {
        LawComponent::PointMass { .. } => 0.0,
        LawComponent::Gaussian { std, .. } => std * std,
    };
    match law {
        InitialLaw::PointMass { .. } => Ok(0.0),
        InitialLaw::Gaussian { std, .. } => Ok(std * std),
        InitialLaw::Product { components } => Ok(components.iter().map(component).fold(0.0, f64::max)),
        InitialLaw::Particles { points } => {
            if points.windows(2).all(|p| p[0] == p[1]) {
                Ok(0.0)
            } else {
                Err(GameError::Unsupported(
                    "particle clouds with several distinct points have no finite Poincaré constant".into(),
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn catalog() {
        assert_eq!(poincare_constant(&InitialLaw::point_mass(vec![3.0, -1.0])).unwrap(), 0.0);
        assert_eq!(poincare_constant(&InitialLaw::standard_gaussian(1)).unwrap(), 1.0);
        let product = InitialLaw::Product {
            components: vec![
                LawComponent::Gaussian { mean: vec![0.0], std: 1.0 },
                LawComponent::PointMass { location: vec![2.0] },
            ],
        };
        assert_eq!(poincare_constant(&product).unwrap(), 1.0);
        let cloud = InitialLaw::Particles { points: vec![vec![0.0], vec![1.0]] };
        assert!(matches!(poincare_constant(&cloud), Err(GameError::Unsupported(_))));
    }

    #[test]
    fn gaussian_equality_case() {
        // g(x) = x saturates Var g ≤ C_P E|g'|² with C_P = 1; g = sin breaks no bound.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let var = |f: &dyn Fn(f64) -> f64| {
            let m = xs.iter().map(|&x| f(x)).sum::<f64>() / xs.len() as f64;
            xs.iter().map(|&x| (f(x) - m).powi(2)).sum::<f64>() / xs.len() as f64
        };
        let c = poincare_constant(&InitialLaw::standard_gaussian(1)).unwrap();
        assert!((var(&|x| x) - c).abs() < 0.02);
        let energy = xs.iter().map(|x| x.cos().powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(var(&|x| x.sin()) <= c * energy);
    }
}
