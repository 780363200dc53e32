//! Sweeps behind the command line: equilibrium gaps, universality, vanishing
//! viscosity, the weighted empirical-measure rate, single-instance checks and
//! solves. Every runner is deterministic given its configuration; only the
//! timings in `summary.json` vary between runs.

mod check;
mod config;
mod gap;
mod output;
mod solve;
mod universality;
mod viscosity;

use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::{json, Value};

use crate::error::{GameError, Result};
use crate::measures::{fg_rate_experiment, fit_loglog, ProfileKind};

pub use check::{run_check, CheckReport};
pub use config::{
    CheckSettings, ExperimentConfig, ExperimentKind, FitExpectation, GameTemplate, GraphRule, SigmaRule, SolveSettings,
};
pub use gap::{run_gap_sweep, GapReport, GapRow};
pub use output::{fit_column, Cell, ExperimentOutput, FitOutcome, Table, ZERO_FLOOR};
pub use solve::{run_solve, SolveOutput};
pub use universality::{run_universality_sweep, SupEstimator, UniversalityReport, UniversalityRow, REFERENCE_CLOUD};
pub use viscosity::{run_viscosity_sweep, ViscosityReport, ViscosityRow};

fn fits_text(fits: &BTreeMap<String, FitOutcome>) -> String {
    let mut s = String::new();
    for (name, f) in fits {
        let line = match f {
            FitOutcome::Fitted { fit } => format!("fit {name}: slope {:.4}, r2 {:.4}\n", fit.slope, fit.r2),
            FitOutcome::DegenerateZeros => format!("fit {name}: degenerate zeros (all values <= {ZERO_FLOOR:e})\n"),
            FitOutcome::Failed { reason } => format!("fit {name}: skipped ({reason})\n"),
        };
        s.push_str(&line);
    }
    s
}

fn warnings_text(warnings: &[String]) -> String {
    warnings.iter().map(|w| format!("warning: {w}\n")).collect()
}

/// Verdict of the configured expectation against one headline fit.
fn expectation(config: &ExperimentConfig, headline: Option<&FitOutcome>) -> Value {
    match (config.expect, headline) {
        (Some(e), Some(f)) => json!({ "bounds": e, "met": f.meets(&e) }),
        _ => Value::Null,
    }
}

/// Runs the configured experiment and collects its tables, files and summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let mut summary = json!({
        "experiment": config.experiment.as_str(),
        "seed": config.seed,
        "config": config,
    });
    let (tables, files, text, extra) = match config.experiment {
        ExperimentKind::Gap => {
            let r = run_gap_sweep(config)?;
            let text = r.table().to_text() + &fits_text(&r.fits);
            let fingerprints: Vec<_> = r.rows.iter().map(|row| &row.noise).collect();
            let extra = json!({
                "fits": r.fits,
                "fingerprints": fingerprints,
                "warnings": Vec::<String>::new(),
                "expectation": expectation(config, r.fits.get("cl_ol_full")),
            });
            (vec![r.table()], vec![], text, extra)
        }
        ExperimentKind::Universality => {
            let r = run_universality_sweep(config)?;
            let text = r.table().to_text() + &fits_text(&r.fits) + &warnings_text(&r.warnings);
            let fingerprints: Vec<_> = r.rows.iter().filter_map(|row| row.noise.as_ref()).collect();
            let extra = json!({
                "mode": r.mode,
                "estimator": r.estimator,
                "fits": r.fits,
                "fingerprints": fingerprints,
                "warnings": r.warnings,
                "expectation": expectation(config, r.fits.get("ol_mfg_sup")),
            });
            (vec![r.table()], vec![], text, extra)
        }
        ExperimentKind::Viscosity => {
            let r = run_viscosity_sweep(config)?;
            let text = r.table().to_text() + &fits_text(&r.fits) + &warnings_text(&r.warnings);
            let fingerprints: Vec<_> = r.rows.iter().map(|row| &row.noise).collect();
            let extra = json!({
                "sigma_rule": r.sigma_rule,
                "estimator": r.estimator,
                "decreasing": r.decreasing,
                "fits": r.fits,
                "fingerprints": fingerprints,
                "warnings": r.warnings,
                "expectation": expectation(config, r.fits.get("gap_vs_rho_plus_sigma")),
            });
            (vec![r.table()], vec![], text, extra)
        }
        ExperimentKind::Fgrate => {
            let fg = config
                .fgrate
                .as_ref()
                .ok_or_else(|| GameError::Config("the fgrate experiment needs an fgrate section".into()))?;
            let r = fg_rate_experiment(fg)?;
            let uniform: Vec<(f64, f64)> = r
                .rows
                .iter()
                .zip(&fg.profiles)
                .filter(|(_, p)| matches!(p.kind, ProfileKind::Uniform))
                .map(|(row, _)| (row.k, row.estimate))
                .collect();
            let mut fits = BTreeMap::new();
            if let Some(f) = &r.fit {
                fits.insert("all_profiles".to_string(), FitOutcome::Fitted { fit: f.clone() });
            }
            if !uniform.is_empty() {
                let (xs, ys): (Vec<f64>, Vec<f64>) = uniform.into_iter().unzip();
                let outcome = match fit_loglog(&xs, &ys) {
                    Ok(fit) => FitOutcome::Fitted { fit },
                    Err(e) => FitOutcome::Failed { reason: e.to_string() },
                };
                fits.insert("uniform".to_string(), outcome);
            }
            let mut text = String::from("profile_id        K          estimate    std_error   rho_theory\n");
            for row in &r.rows {
                text.push_str(&format!(
                    "{:<12} {:>10.4e} {:>11.4e} {:>11.4e} {:>11.4e}\n",
                    row.profile_id, row.k, row.estimate, row.std_error, row.rho_theory
                ));
            }
            text.push_str(&fits_text(&fits));
            let extra = json!({
                "fits": fits,
                "rows": r.rows,
                "warnings": Vec::<String>::new(),
                "expectation": expectation(config, fits.get("uniform")),
            });
            (vec![], vec![("fgrate.csv".to_string(), r.to_csv()?)], text, extra)
        }
        ExperimentKind::Check => {
            let r = run_check(config)?;
            let report = serde_json::to_string_pretty(&r)?;
            let text = format!("{report}\n\n{}", r.summary_table().to_text());
            let extra = json!({ "report": r });
            (vec![r.summary_table(), r.interaction_table()], vec![("check.json".to_string(), report + "\n")], text, extra)
        }
        ExperimentKind::Solve => {
            let r = run_solve(config)?;
            let mut files: Vec<(String, String)> = Vec::new();
            for (name, v) in &r.equilibria {
                files.push((name.clone(), serde_json::to_string(v)? + "\n"));
            }
            files.extend(r.csv_files.iter().cloned());
            let text = r.tables.iter().map(|t| format!("{}:\n{}", t.name, t.to_text())).collect::<Vec<_>>().join("\n");
            (r.tables, files, text, json!({ "result": r.summary }))
        }
    };
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, extra) {
        s.extend(e);
        s.insert("timings".into(), json!({ "total_seconds": start.elapsed().as_secs_f64() }));
    }
    Ok(ExperimentOutput { tables, files, summary, text })
}
