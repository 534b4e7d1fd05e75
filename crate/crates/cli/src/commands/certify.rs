//! `certify`: pointwise convexity certificates for one variable.

use super::{current_delta_plan, load_graph_file, resolve_variable, sample_points};
use crate::config::RunConfig;
use anyhow::{Context, Result};
use convexcert_core::curvature::{certificate_document, certify, margins_csv, Verdict};

pub fn run(cfg: &RunConfig) -> Result<i32> {
    let g = load_graph_file(cfg)?;
    let variable = resolve_variable(&g, cfg)?;
    let points = sample_points(&g, cfg)?;

    let mut reports = Vec::with_capacity(points.len());
    for (i, bindings) in points.iter().enumerate() {
        let mut report = certify(&g, bindings, variable)
            .with_context(|| format!("certification failed at point p{i}"))?;
        report.point_id = format!("p{i}");
        reports.push(report);
    }

    let doc = certificate_document(reports, current_delta_plan(&g));
    std::fs::create_dir_all(&cfg.out)?;
    let json_path = cfg.out.join("certificate.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
    std::fs::write(cfg.out.join("margins.csv"), margins_csv(&doc))?;

    let mut certified = 0;
    let mut violated = 0;
    let mut circled = 0;
    for point in &doc.points {
        match &point.verdict {
            Verdict::Certified => certified += 1,
            Verdict::MarginViolated { node } => {
                violated += 1;
                if violated <= 3 {
                    println!("{}: margin violated at function node '{node}'", point.point_id);
                }
            }
            Verdict::CircleUncertified { meet } => {
                circled += 1;
                if circled == 1 {
                    println!("circle detected: '{}' meets at '{meet}'", doc.variable);
                    for circle in &point.circles {
                        for branch in &circle.branches {
                            println!("  branch: {}", branch.join(" -> "));
                        }
                    }
                }
            }
        }
    }
    println!(
        "certified {certified}/{} points for variable '{}' ({})",
        doc.points.len(),
        doc.variable,
        json_path.display()
    );

    if circled > 0 {
        Ok(3)
    } else if violated > 0 {
        Ok(1)
    } else {
        Ok(0)
    }
}
