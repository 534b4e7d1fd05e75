//! `scale-search`: largest uniform scale factor that certifies everywhere.

use super::{load_graph_file, resolve_variable, sample_points};
use crate::config::RunConfig;
use anyhow::Result;
use convexcert_core::curvature::{search_delta, GridEntry};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Serialize)]
struct PlanFile {
    variable: String,
    delta: f64,
    certified: bool,
    has_circles: bool,
    plan: BTreeMap<String, f64>,
    table: Vec<GridEntry>,
}

pub fn run(cfg: &RunConfig) -> Result<i32> {
    let g = load_graph_file(cfg)?;
    let variable = resolve_variable(&g, cfg)?;
    let points = sample_points(&g, cfg)?;
    let outcome = search_delta(&g, variable, &points, &cfg.deltas)?;

    let plan = PlanFile {
        variable: g.name(variable).to_string(),
        delta: outcome.delta,
        certified: outcome.certified,
        has_circles: outcome.has_circles,
        plan: outcome.plan.iter().map(|(id, d)| (g.name(*id).to_string(), *d)).collect(),
        table: outcome.table.clone(),
    };
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("scale_plan.json"), serde_json::to_string_pretty(&plan)?)?;
    let mut csv = String::from("delta,min_margin,certified\n");
    for entry in &outcome.table {
        csv.push_str(&format!(
            "{},{},{}\n",
            entry.delta,
            entry.min_margin.map(|m| m.to_string()).unwrap_or_default(),
            entry.certified
        ));
    }
    std::fs::write(cfg.out.join("scale_table.csv"), csv)?;

    if outcome.has_circles {
        println!(
            "variable '{}' sits inside a circle: no scale factor certifies it by path \
             propagation; NotCertified. Consider a residual-ratio study to gauge how much \
             cross-use curvature the per-use approximation misses at each factor.",
            g.name(variable)
        );
        return Ok(3);
    }
    if outcome.certified {
        println!("selected scale factor {} (certified at all {} points)", outcome.delta, points.len());
        Ok(0)
    } else {
        println!(
            "NotCertified: no grid factor certified everywhere; best worst-case margin at {}",
            outcome.delta
        );
        Ok(1)
    }
}
