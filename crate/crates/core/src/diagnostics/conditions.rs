use serde::{Deserialize, Serialize};

use super::{InteractionMetrics, MonotonicityReport};

/// User-supplied values for the existential constants `C` of the
/// weak-interaction conditions; absent constants leave the verdict open.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionThresholds {
    /// `C` in `δ Σ δ^i ≤ σ²/C`.
    pub displacement: Option<f64>,
    /// `C` in `δ Σ δ^i, √(κκ̃) ≤ exp(−exp(C(1 + 1/σ)))` and
    /// `C_{G,LL} + T C_{F,LL} ≤ exp(−C(1 + 1/σ))/T`.
    pub lasry_lions: Option<f64>,
}

/// Left-hand sides of the smallness conditions and verdicts against the
/// supplied thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub sigma: f64,
    pub weak1: f64,
    pub weak2: f64,
    pub c_disp: f64,
    /// `C_{G,LL} + T·C_{F,LL}`.
    pub ll_lhs: f64,
    pub displacement_monotone: bool,
    pub weak1_displacement: Option<bool>,
    pub weak1_lasry_lions: Option<bool>,
    pub weak2_lasry_lions: Option<bool>,
    pub ll_smallness: Option<bool>,
}

pub fn condition_check(
    report: &MonotonicityReport,
    metrics: &InteractionMetrics,
    sigma: f64,
    thresholds: &ConditionThresholds,
) -> ConditionVerdict {
    let horizon = report.horizon;
    let ll_lhs = report.c_g_ll + horizon * report.c_f_ll;
    let ll_bound = thresholds.lasry_lions.map(|c| (-(c * (1.0 + 1.0 / sigma)).exp()).exp());
    ConditionVerdict {
        sigma,
        weak1: metrics.weak1,
        weak2: metrics.weak2,
        c_disp: report.c_disp,
        ll_lhs,
        displacement_monotone: report.c_disp > 0.0,
        weak1_displacement: thresholds.displacement.map(|c| metrics.weak1 <= sigma * sigma / c),
        weak1_lasry_lions: ll_bound.map(|b| metrics.weak1 <= b),
        weak2_lasry_lions: ll_bound.map(|b| metrics.weak2.sqrt() <= b),
        ll_smallness: thresholds
            .lasry_lions
            .map(|c| ll_lhs <= (-(c * (1.0 + 1.0 / sigma))).exp() / horizon),
    }
}

/// Whether a sequence (e.g. `weak1` along increasing `N`) strictly decreases.
pub fn is_monotone_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|p| p[1] < p[0])
}
