//! Hypothesis-side quantities: semi-monotonicity constants, interaction
//! strengths, weak-interaction statistics and graph regularity.

mod conditions;
mod graph;
mod interaction;
mod monotonicity;

pub use conditions::{condition_check, is_monotone_decreasing, ConditionThresholds, ConditionVerdict};
pub use graph::{graph_stats, GraphStats, PartitionStat};
pub use interaction::{interaction_metrics, InteractionMetrics, MetricDomain};
pub use monotonicity::{
    displacement_report, displacement_report_with, lasry_lions_report, lasry_lions_report_with,
    MonotonicityMethod, MonotonicityOptions, MonotonicityReport,
};

use crate::game::{GameSpec, InitialLaw, LawComponent};

/// Default half-width of the box on which gradient sups are taken: the
/// largest initial mean plus five standard deviations of the initial law
/// inflated by the Brownian spread over the horizon.
pub fn default_box_radius(game: &GameSpec) -> f64 {
    let d = game.d;
    let max_mean = (0..game.n)
        .flat_map(|i| game.initial_law.mean(i, d))
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let std = match &game.initial_law {
        InitialLaw::PointMass { .. } => 0.0,
        InitialLaw::Gaussian { std, .. } => *std,
        InitialLaw::Product { components } => components
            .iter()
            .map(|c| match c {
                LawComponent::PointMass { .. } => 0.0,
                LawComponent::Gaussian { std, .. } => *std,
            })
            .fold(0.0, f64::max),
        InitialLaw::Particles { points } => {
            let m = points.len() as f64;
            let mut worst = 0.0_f64;
            for k in 0..d {
                let mean = points.iter().map(|p| p[k]).sum::<f64>() / m;
                let var = points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / m;
                worst = worst.max(var.sqrt());
            }
            worst
        }
    };
    let spread = (2.0 * (game.sigma + game.sigma0) * game.horizon()).sqrt();
    max_mean + 5.0 * (std + spread)
}
