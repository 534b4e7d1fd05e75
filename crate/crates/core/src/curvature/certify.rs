//! Whole-path certification and the uniform scale-factor search.

use super::{
    backprop_blocks, circle_reports, function_margin, CertificateReport, CurvatureError,
    MarginRecord, Verdict,
};
use crate::graph::{apply_scale, detect_circles, forward, uniform_scale_plan, Bindings, Graph,
    NodeId, NodeKind};
use std::collections::BTreeMap;

/// Certifies the objective's convexity in `variable` at one binding point.
///
/// Runs forward evaluation, circle detection, seed construction, block
/// propagation and the margin check at every function node on the
/// loss-to-variable path. The verdict is `Certified` only when no circle
/// exists and every per-sample margin is nonnegative.
pub fn certify(
    g: &Graph,
    bindings: &Bindings,
    variable: NodeId,
) -> Result<CertificateReport, CurvatureError> {
    let circles = detect_circles(g, variable)?;
    if !circles.is_empty() {
        return Ok(CertificateReport {
            variable: g.name(variable).to_string(),
            point_id: "p0".to_string(),
            verdict: Verdict::CircleUncertified { meet: g.name(circles[0].meet).to_string() },
            margins: vec![],
            circles: circle_reports(g, &circles),
        });
    }
    let acts = forward(g, bindings)?;
    let state = backprop_blocks(g, &acts, variable)?;
    let mut margins: Vec<MarginRecord> = Vec::new();
    for &node in state.path() {
        if matches!(g.kind(node), NodeKind::Func { .. }) {
            margins.push(function_margin(g, &acts, &state, node)?);
        }
    }
    let verdict = margins
        .iter()
        .find(|m| !m.all_nonnegative())
        .map(|m| Verdict::MarginViolated { node: m.node.clone() })
        .unwrap_or(Verdict::Certified);
    Ok(CertificateReport {
        variable: g.name(variable).to_string(),
        point_id: "p0".to_string(),
        verdict,
        margins,
        circles: vec![],
    })
}

/// One grid row of a scale search.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridEntry {
    pub delta: f64,
    /// Worst margin over all points, nodes and samples; absent when margins
    /// cannot be evaluated (circles) or the path has no function node.
    pub min_margin: Option<f64>,
    pub certified: bool,
}

/// Result of [`search_delta`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSearchOutcome {
    /// Chosen uniform scale factor (largest certifying grid value, or the
    /// best-margin fallback when nothing certifies).
    pub delta: f64,
    pub certified: bool,
    pub has_circles: bool,
    /// The chosen factor assigned to every function node.
    pub plan: BTreeMap<NodeId, f64>,
    pub table: Vec<GridEntry>,
}

/// Searches a descending grid for the largest uniform scale factor under
/// which `certify` succeeds at every supplied point.
///
/// All function nodes share one factor. When no grid value certifies, the
/// entry with the largest worst-case margin is reported with
/// `certified: false`. Graphs with circles short-circuit: no factor can
/// certify them by path propagation.
pub fn search_delta(
    g: &Graph,
    variable: NodeId,
    points: &[Bindings],
    grid: &[f64],
) -> Result<ScaleSearchOutcome, CurvatureError> {
    if grid.is_empty() {
        return Err(CurvatureError::InvalidGrid { reason: "is empty".to_string() });
    }
    for pair in grid.windows(2) {
        if pair[1] >= pair[0] {
            return Err(CurvatureError::InvalidGrid {
                reason: format!("must be strictly descending, got {} before {}", pair[0], pair[1]),
            });
        }
    }
    if let Some(&bad) = grid.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
        return Err(CurvatureError::InvalidGrid {
            reason: format!("value {bad} outside (0, 1]"),
        });
    }

    let circles = detect_circles(g, variable)?;
    if !circles.is_empty() {
        let delta = grid[0];
        return Ok(ScaleSearchOutcome {
            delta,
            certified: false,
            has_circles: true,
            plan: uniform_scale_plan(g, delta),
            table: grid
                .iter()
                .map(|&d| GridEntry { delta: d, min_margin: None, certified: false })
                .collect(),
        });
    }

    let mut table = Vec::with_capacity(grid.len());
    let mut chosen: Option<f64> = None;
    for &delta in grid {
        let scaled = apply_scale(g, &uniform_scale_plan(g, delta))?;
        let mut all_certified = true;
        let mut min_margin: Option<f64> = None;
        for bindings in points {
            let report = certify(&scaled, bindings, variable)?;
            if !report.verdict.is_certified() {
                all_certified = false;
            }
            if let Some(m) = report.min_margin() {
                min_margin = Some(min_margin.map_or(m, |cur: f64| cur.min(m)));
            }
        }
        table.push(GridEntry { delta, min_margin, certified: all_certified });
        if all_certified && chosen.is_none() {
            chosen = Some(delta);
        }
    }

    let (delta, certified) = match chosen {
        Some(d) => (d, true),
        None => {
            // Fall back to the best worst-case margin.
            let best = table
                .iter()
                .max_by(|a, b| {
                    let ma = a.min_margin.unwrap_or(f64::NEG_INFINITY);
                    let mb = b.min_margin.unwrap_or(f64::NEG_INFINITY);
                    ma.partial_cmp(&mb).expect("margins are finite")
                })
                .expect("grid is nonempty");
            (best.delta, false)
        }
    };

    Ok(ScaleSearchOutcome {
        delta,
        certified,
        has_circles: false,
        plan: uniform_scale_plan(g, delta),
        table,
    })
}
