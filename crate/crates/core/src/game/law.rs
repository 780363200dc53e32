use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// One player's initial distribution inside a product law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum LawComponent {
    PointMass { location: Vec<f64> },
    /// `N(mean, std² I_d)`.
    Gaussian { mean: Vec<f64>, std: f64 },
}

/// Law of the initial state vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum InitialLaw {
    /// Every player starts at `location`.
    PointMass { location: Vec<f64> },
    /// i.i.d. `N(mean, std² I_d)` for every player.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Independent, player-specific components.
    Product { components: Vec<LawComponent> },
    /// i.i.d. uniform draws from an explicit cloud of points.
    Particles { points: Vec<Vec<f64>> },
}

impl LawComponent {
    fn dim(&self) -> usize {
        match self {
            LawComponent::PointMass { location } => location.len(),
            LawComponent::Gaussian { mean, .. } => mean.len(),
        }
    }

    fn mean(&self) -> Vec<f64> {
        match self {
            LawComponent::PointMass { location } => location.clone(),
            LawComponent::Gaussian { mean, .. } => mean.clone(),
        }
    }

    fn draw(&self, normals: &[f64], out: &mut [f64]) {
        match self {
            LawComponent::PointMass { location } => out.copy_from_slice(location),
            LawComponent::Gaussian { mean, std } => {
                for ((o, m), z) in out.iter_mut().zip(mean).zip(normals) {
                    *o = m + std * z;
                }
            }
        }
    }
}

impl InitialLaw {
    pub fn point_mass(location: Vec<f64>) -> Self {
        InitialLaw::PointMass { location }
    }

    pub fn standard_gaussian(d: usize) -> Self {
        InitialLaw::Gaussian { mean: vec![0.0; d], std: 1.0 }
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        let check_dim = |k: usize, what: &str| {
            if k == d {
                Ok(())
            } else {
                Err(GameError::DimensionMismatch(format!(
                    "{what} has dimension {k}, game has d = {d}"
                )))
            }
        };
        match self {
            InitialLaw::PointMass { location } => check_dim(location.len(), "point mass")?,
            InitialLaw::Gaussian { mean, std } => {
                check_dim(mean.len(), "gaussian mean")?;
                if !(*std >= 0.0 && std.is_finite()) {
                    return Err(GameError::config(format!("gaussian std {std} must be >= 0")));
                }
            }
            InitialLaw::Product { components } => {
                if components.len() != n {
                    return Err(GameError::DimensionMismatch(format!(
                        "product law has {} components for {n} players",
                        components.len()
                    )));
                }
                for c in components {
                    check_dim(c.dim(), "product component")?;
                    if let LawComponent::Gaussian { std, .. } = c {
                        if !(*std >= 0.0) {
                            return Err(GameError::config("gaussian std must be >= 0"));
                        }
                    }
                }
            }
            InitialLaw::Particles { points } => {
                if points.is_empty() {
                    return Err(GameError::config("particle cloud is empty"));
                }
                for p in points {
                    check_dim(p.len(), "particle")?;
                }
            }
        }
        let finite = match self {
            InitialLaw::PointMass { location } => location.iter().all(|x| x.is_finite()),
            InitialLaw::Gaussian { mean, .. } => mean.iter().all(|x| x.is_finite()),
            InitialLaw::Product { components } => components.iter().all(|c| c.mean().iter().all(|x| x.is_finite())),
            InitialLaw::Particles { points } => points.iter().flatten().all(|x| x.is_finite()),
        };
        if !finite {
            return Err(GameError::NonFinite("initial law parameter".into()));
        }
        Ok(())
    }

    /// Mean of player `i`'s initial state.
    pub fn mean(&self, i: usize, d: usize) -> Vec<f64> {
        match self {
            InitialLaw::PointMass { location } => location.clone(),
            InitialLaw::Gaussian { mean, .. } => mean.clone(),
            InitialLaw::Product { components } => components[i].mean(),
            InitialLaw::Particles { points } => {
                let mut m = vec![0.0; d];
                for p in points {
                    for (mk, pk) in m.iter_mut().zip(p) {
                        *mk += pk;
                    }
                }
                m.iter_mut().for_each(|v| *v /= points.len() as f64);
                m
            }
        }
    }

    /// Whether all players share one law (needed for the mean-field limit).
    pub fn is_exchangeable(&self) -> bool {
        match self {
            InitialLaw::Product { components } => components.windows(2).all(|w| w[0] == w[1]),
            _ => true,
        }
    }

    /// Whether every player starts deterministically.
    pub fn is_deterministic(&self) -> bool {
        match self {
            InitialLaw::PointMass { .. } => true,
            InitialLaw::Gaussian { std, .. } => *std == 0.0,
            InitialLaw::Product { components } => components.iter().all(|c| match c {
                LawComponent::PointMass { .. } => true,
                LawComponent::Gaussian { std, .. } => *std == 0.0,
            }),
            InitialLaw::Particles { points } => points.len() == 1,
        }
    }

    /// Draws player `i`'s initial state from pre-generated standard normals
    /// (length `d`) and one uniform on `[0, 1)`.
    pub fn draw_into(&self, i: usize, normals: &[f64], uniform: f64, out: &mut [f64]) {
        match self {
            InitialLaw::PointMass { location } => out.copy_from_slice(location),
            InitialLaw::Gaussian { mean, std } => {
                for ((o, m), z) in out.iter_mut().zip(mean).zip(normals) {
                    *o = m + std * z;
                }
            }
            InitialLaw::Product { components } => components[i].draw(normals, out),
            InitialLaw::Particles { points } => {
                let idx = ((uniform * points.len() as f64) as usize).min(points.len() - 1);
                out.copy_from_slice(&points[idx]);
            }
        }
    }
}
