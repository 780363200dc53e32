use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::Table;
use crate::diagnostics::{
    condition_check, default_box_radius, displacement_report_with, graph_stats, interaction_metrics, ConditionVerdict,
    GraphStats, InteractionMetrics, MonotonicityOptions, MonotonicityReport,
};
use crate::error::Result;

/// Every diagnostic of one game instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub n: usize,
    pub box_radius: f64,
    pub monotonicity: MonotonicityReport,
    pub interaction: InteractionMetrics,
    pub graph: GraphStats,
    pub verdict: ConditionVerdict,
}

impl CheckReport {
    /// Scalar quantities as `(name, value)` rows.
    pub fn summary_table(&self) -> Table {
        let m = &self.monotonicity;
        let i = &self.interaction;
        let g = &self.graph;
        let mut t = Table::new("check", &["quantity", "value"]);
        let rows: [(&str, f64); 22] = [
            ("n", self.n as f64),
            ("box_radius", self.box_radius),
            ("c_f_disp", m.c_f_disp),
            ("c_g_disp", m.c_g_disp),
            ("c_f_ll", m.c_f_ll),
            ("c_g_ll", m.c_g_ll),
            ("c_l", m.c_l),
            ("c_disp", m.c_disp),
            ("c_df_lip", m.c_df_lip),
            ("c_dg_lip", m.c_dg_lip),
            ("delta", i.delta),
            ("kappa", i.kappa),
            ("kappa_tilde", i.kappa_tilde),
            ("weak1", i.weak1),
            ("weak2", i.weak2),
            ("ll_lhs", self.verdict.ll_lhs),
            ("frobenius", g.frobenius),
            ("max_row_l2", g.max_row_l2),
            ("max_col_l1", g.max_col_l1),
            ("sym_min_eig", g.sym_min_eig),
            ("dd_product", g.dd_product),
            ("displacement_monotone", if m.displacement_monotone { 1.0 } else { 0.0 }),
        ];
        for (name, v) in rows {
            t.push(vec![name.into(), v.into()]);
        }
        t
    }

    /// Per-player interaction strengths.
    pub fn interaction_table(&self) -> Table {
        let i = &self.interaction;
        let mut t = Table::new("interaction", &["player", "delta_i", "kappa_i", "kappa_tilde_i", "delta_sampled_i"]);
        for p in 0..i.delta_i.len() {
            t.push(vec![p.into(), i.delta_i[p].into(), i.kappa_i[p].into(), i.kappa_tilde_i[p].into(), i.delta_sampled_i[p].into()]);
        }
        t
    }
}

/// Monotonicity constants, interaction strengths, graph statistics and the
/// condition verdict of the template at its own size.
pub fn run_check(config: &ExperimentConfig) -> Result<CheckReport> {
    let game = config.template()?.single(config.seed)?;
    let settings = &config.check;
    let box_radius = settings.box_radius.unwrap_or_else(|| default_box_radius(&game));
    let opts = MonotonicityOptions {
        n_samples: settings.n_samples,
        seed: config.seed,
        box_radius: Some(box_radius),
        ..MonotonicityOptions::default()
    };
    let monotonicity = displacement_report_with(&game, &opts)?;
    let interaction = interaction_metrics(&game, Some(box_radius), settings.n_samples, config.seed)?;
    let graph = graph_stats(&game.weights, settings.partition.as_deref())?;
    let verdict = condition_check(&monotonicity, &interaction, game.sigma, &settings.thresholds);
    Ok(CheckReport { n: game.n, box_radius, monotonicity, interaction, graph, verdict })
}
