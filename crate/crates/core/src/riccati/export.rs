use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{Coefficients, LQEquilibrium, TrajectoryBundle};
use crate::error::{GameError, Result};
use crate::format::sci12;
use crate::linalg::to_row_major;

/// Grid plus row-major coefficient arrays per node.
pub fn equilibrium_to_json(eq: &LQEquilibrium) -> Value {
    let mut doc = json!({
        "kind": eq.kind,
        "grid": eq.grid,
        "n": eq.n,
        "d": eq.d,
        "times": eq.grid.nodes(),
    });
    let obj = doc.as_object_mut().expect("object");
    match &eq.coefficients {
        Coefficients::OpenLoop { lambda } => {
            obj.insert("lambda".into(), json!(lambda.iter().map(to_row_major).collect::<Vec<_>>()));
        }
        Coefficients::ClosedLoop { feedback, p_list } => {
            obj.insert("feedback".into(), json!(feedback.iter().map(to_row_major).collect::<Vec<_>>()));
            if let Some(p) = p_list {
                let nested: Vec<Vec<Vec<f64>>> = p.iter().map(|node| node.iter().map(to_row_major).collect()).collect();
                obj.insert("p_list".into(), json!(nested));
            }
        }
        Coefficients::Distributed {
            pi,
            rho,
            mu,
            picard_iterations,
            picard_delta,
        } => {
            obj.insert("pi".into(), json!(pi));
            obj.insert("rho".into(), json!(rho));
            obj.insert("mu".into(), json!(mu));
            obj.insert("picard_iterations".into(), json!(picard_iterations));
            obj.insert("picard_delta".into(), json!(picard_delta));
        }
        Coefficients::MeanField {
            pi,
            eta,
            coupling,
            sigma0,
            mu_bar,
            rho,
            picard_iterations,
            decoupling_gap,
        } => {
            obj.insert("pi".into(), json!(pi));
            obj.insert("eta".into(), json!(eta));
            obj.insert("coupling".into(), json!(coupling));
            obj.insert("sigma0".into(), json!(sigma0));
            obj.insert("mu_bar".into(), json!(mu_bar));
            obj.insert("rho".into(), json!(rho));
            obj.insert("picard_iterations".into(), json!(picard_iterations));
            obj.insert("decoupling_gap".into(), json!(decoupling_gap));
        }
    }
    doc
}

/// `path_id,step,time,member_kind,player,x0..,a0..` for every recorded path.
pub fn trajectories_to_csv(bundle: &TrajectoryBundle) -> Result<String> {
    let rec = bundle
        .recorded
        .as_ref()
        .ok_or_else(|| GameError::config("no recorded paths; rerun with record_paths > 0"))?;
    let d = bundle.d;
    let mut out = String::from("path_id,step,time,member_kind,player");
    for c in 0..d {
        let _ = write!(out, ",x{c}");
    }
    for c in 0..d {
        let _ = write!(out, ",a{c}");
    }
    out.push('\n');
    for p in 0..rec.n_paths {
        for (m, info) in bundle.members.iter().enumerate() {
            for k in 0..=bundle.grid.n_steps {
                let x = &rec.states[m][p][k];
                let a = &rec.controls[m][p][k];
                for i in 0..bundle.n {
                    let _ = write!(out, "{p},{k},{},{},{i}", sci12(bundle.grid.time(k)), info.label);
                    for c in 0..d {
                        let _ = write!(out, ",{}", sci12(x[i * d + c]));
                    }
                    for c in 0..d {
                        let _ = write!(out, ",{}", sci12(a[i * d + c]));
                    }
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}
