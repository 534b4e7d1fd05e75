//! Serializable certificate output: one JSON document per variable plus a
//! flat CSV of margins.

use super::{CertificateReport, CircleReport, MarginRecord, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Certificate for one variable over a set of evaluated points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub variable: String,
    pub points: Vec<PointReport>,
    /// Scale factors in force during certification, keyed by node name.
    pub delta_plan: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point_id: String,
    pub verdict: Verdict,
    pub margins: Vec<MarginRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub circles: Vec<CircleReport>,
}

impl CertificateDocument {
    pub fn all_certified(&self) -> bool {
        self.points.iter().all(|p| p.verdict.is_certified())
    }

    pub fn any_circle(&self) -> bool {
        self.points.iter().any(|p| matches!(p.verdict, Verdict::CircleUncertified { .. }))
    }
}

/// Bundles per-point reports (all for the same variable) into one document.
pub fn certificate_document(
    reports: Vec<CertificateReport>,
    delta_plan: BTreeMap<String, f64>,
) -> CertificateDocument {
    let variable = reports.first().map(|r| r.variable.clone()).unwrap_or_default();
    let points = reports
        .into_iter()
        .map(|r| PointReport {
            point_id: r.point_id,
            verdict: r.verdict,
            margins: r.margins,
            circles: r.circles,
        })
        .collect();
    CertificateDocument { variable, points, delta_plan }
}

/// Flat margin table: `point_id,node,sample,lambda_min,correction,margin`.
pub fn margins_csv(doc: &CertificateDocument) -> String {
    let mut out = String::from("point_id,node,sample,lambda_min,correction,margin\n");
    for point in &doc.points {
        for rec in &point.margins {
            for s in 0..rec.margin.len() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    point.point_id,
                    rec.node,
                    s,
                    rec.lambda_min[s],
                    rec.correction[s],
                    rec.margin[s]
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trips_through_json() {
        let doc = certificate_document(
            vec![CertificateReport {
                variable: "w".into(),
                point_id: "p0".into(),
                verdict: Verdict::MarginViolated { node: "s1".into() },
                margins: vec![MarginRecord {
                    node: "s1".into(),
                    lambda_min: vec![1.0, 0.5],
                    correction: vec![-2.0, 0.1],
                    margin: vec![-1.0, 0.6],
                }],
                circles: vec![],
            }],
            [("s1".to_string(), 0.5)].into_iter().collect(),
        );
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let back: CertificateDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        assert!(!doc.all_certified());
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let doc = certificate_document(
            vec![CertificateReport {
                variable: "w".into(),
                point_id: "p3".into(),
                verdict: Verdict::Certified,
                margins: vec![MarginRecord {
                    node: "s1".into(),
                    lambda_min: vec![1.0, 2.0],
                    correction: vec![0.0, 0.0],
                    margin: vec![1.0, 2.0],
                }],
                circles: vec![],
            }],
            BTreeMap::new(),
        );
        let csv = margins_csv(&doc);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "p3,s1,0,1,0,1");
        assert_eq!(lines[2], "p3,s1,1,2,0,2");
    }
}
