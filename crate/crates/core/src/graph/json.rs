//! Graph description files.
//!
//! A graph is a JSON document listing nodes in evaluation order:
//!
//! ```json
//! {
//!   "nodes": [
//!     {"id": "x",    "kind": "input",     "params": {"shape": [2, 4]}},
//!     {"id": "w",    "kind": "parameter", "params": {"shape": [3, 2]}},
//!     {"id": "z",    "kind": "matmul",    "inputs": ["w", "x"]},
//!     {"id": "a",    "kind": "func",      "inputs": ["z"], "params": {"func": "sigmoid", "delta": 1.0}},
//!     {"id": "y",    "kind": "input",     "params": {"shape": [3, 4]}},
//!     {"id": "loss", "kind": "loss",      "inputs": ["a", "y"], "params": {"loss": "square"}}
//!   ]
//! }
//! ```
//!
//! `shape` is required for `input`/`parameter` nodes, `func` (with optional
//! `delta`, default 1.0) for function nodes, and `loss` for the loss node.
//! Unknown kinds, functions and losses are rejected.

use super::{FunctionId, Graph, GraphBuilder, GraphError, LossId, NodeId, NodeKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<NodeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeEntry {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "NodeParams::is_empty")]
    params: NodeParams,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct NodeParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    func: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<String>,
}

impl NodeParams {
    fn is_empty(&self) -> bool {
        self.shape.is_none() && self.func.is_none() && self.delta.is_none() && self.loss.is_none()
    }
}

/// Errors surfaced while reading or writing graph files.
#[derive(Debug, thiserror::Error)]
pub enum GraphIoError {
    #[error("failed to read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("failed to write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("malformed graph document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parses a graph from its JSON document text.
pub fn graph_from_json(text: &str) -> Result<Graph, GraphIoError> {
    let file: GraphFile = serde_json::from_str(text)?;
    let mut builder = GraphBuilder::new();
    let mut by_name: BTreeMap<String, NodeId> = BTreeMap::new();

    for entry in &file.nodes {
        let resolve = |names: &[String]| -> Result<Vec<NodeId>, GraphError> {
            names
                .iter()
                .map(|n| {
                    by_name.get(n).copied().ok_or_else(|| GraphError::ForwardReference {
                        node: entry.id.clone(),
                        input: n.clone(),
                    })
                })
                .collect()
        };
        let expect_arity = |expected: usize| -> Result<(), GraphError> {
            if entry.inputs.len() != expected {
                Err(GraphError::ArityMismatch {
                    node: entry.id.clone(),
                    expected,
                    got: entry.inputs.len(),
                })
            } else {
                Ok(())
            }
        };
        let shape = || -> Result<[usize; 2], GraphError> {
            entry.params.shape.ok_or(GraphError::MissingField { node: entry.id.clone(), field: "shape" })
        };

        let id = match entry.kind.as_str() {
            "input" => {
                expect_arity(0)?;
                let [r, c] = shape()?;
                builder.input(&entry.id, r, c)?
            }
            "parameter" => {
                expect_arity(0)?;
                let [r, c] = shape()?;
                builder.parameter(&entry.id, r, c)?
            }
            "plus" => {
                expect_arity(2)?;
                let ins = resolve(&entry.inputs)?;
                builder.plus(&entry.id, ins[0], ins[1])?
            }
            "elem_mul" => {
                expect_arity(2)?;
                let ins = resolve(&entry.inputs)?;
                builder.elem_mul(&entry.id, ins[0], ins[1])?
            }
            "matmul" => {
                expect_arity(2)?;
                let ins = resolve(&entry.inputs)?;
                builder.matmul(&entry.id, ins[0], ins[1])?
            }
            "conv" => {
                expect_arity(2)?;
                let ins = resolve(&entry.inputs)?;
                builder.conv(&entry.id, ins[0], ins[1])?
            }
            "func" => {
                expect_arity(1)?;
                let ins = resolve(&entry.inputs)?;
                let fname = entry
                    .params
                    .func
                    .as_deref()
                    .ok_or(GraphError::MissingField { node: entry.id.clone(), field: "func" })?;
                let func = FunctionId::parse(fname)
                    .ok_or_else(|| GraphError::UnknownFunction { name: fname.to_string() })?;
                let delta = entry.params.delta.unwrap_or(1.0);
                builder.func(&entry.id, func, delta, ins[0])?
            }
            "loss" => {
                expect_arity(2)?;
                let ins = resolve(&entry.inputs)?;
                let lname = entry
                    .params
                    .loss
                    .as_deref()
                    .ok_or(GraphError::MissingField { node: entry.id.clone(), field: "loss" })?;
                let loss = LossId::parse(lname)
                    .ok_or_else(|| GraphError::UnknownLoss { name: lname.to_string() })?;
                builder.loss(&entry.id, loss, ins[0], ins[1])?
            }
            other => return Err(GraphError::UnknownKind { kind: other.to_string() }.into()),
        };
        by_name.insert(entry.id.clone(), id);
    }

    Ok(builder.build()?)
}

/// Serializes a graph back to its JSON document form.
pub fn graph_to_json(g: &Graph) -> String {
    let nodes = g
        .ids()
        .map(|id| {
            let mut params = NodeParams::default();
            match g.kind(id) {
                NodeKind::Input | NodeKind::Parameter => {
                    let (r, c) = g.shape(id);
                    params.shape = Some([r, c]);
                }
                NodeKind::Func { func, delta } => {
                    params.func = Some(func.name().to_string());
                    params.delta = Some(*delta);
                }
                NodeKind::Loss(loss) => {
                    params.loss = Some(loss.name().to_string());
                }
                _ => {}
            }
            NodeEntry {
                id: g.name(id).to_string(),
                kind: g.kind(id).kind_name().to_string(),
                inputs: g.inputs(id).iter().map(|&i| g.name(i).to_string()).collect(),
                params,
            }
        })
        .collect();
    serde_json::to_string_pretty(&GraphFile { nodes }).expect("graph document serializes")
}

pub fn load_graph(path: &Path) -> Result<Graph, GraphIoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| GraphIoError::Read { path: path.display().to_string(), source })?;
    graph_from_json(&text)
}

pub fn save_graph(g: &Graph, path: &Path) -> Result<(), GraphIoError> {
    std::fs::write(path, graph_to_json(g))
        .map_err(|source| GraphIoError::Write { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
      "nodes": [
        {"id": "x", "kind": "input", "params": {"shape": [2, 1]}},
        {"id": "w", "kind": "parameter", "params": {"shape": [2, 2]}},
        {"id": "z", "kind": "matmul", "inputs": ["w", "x"]},
        {"id": "a", "kind": "func", "inputs": ["z"], "params": {"func": "tanh", "delta": 0.5}},
        {"id": "y", "kind": "input", "params": {"shape": [2, 1]}},
        {"id": "loss", "kind": "loss", "inputs": ["a", "y"], "params": {"loss": "square"}}
      ]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let g = graph_from_json(DOC).unwrap();
        assert_eq!(g.node_count(), 6);
        let a = g.find("a").unwrap();
        assert_eq!(*g.kind(a), NodeKind::Func { func: FunctionId::Tanh, delta: 0.5 });
        let again = graph_from_json(&graph_to_json(&g)).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn rejects_unknown_kind() {
        let doc = r#"{"nodes": [{"id": "x", "kind": "mystery", "params": {"shape": [1, 1]}}]}"#;
        let err = graph_from_json(doc).unwrap_err();
        assert!(matches!(err, GraphIoError::Graph(GraphError::UnknownKind { .. })));
    }

    #[test]
    fn rejects_forward_reference() {
        let doc = r#"{
          "nodes": [
            {"id": "z", "kind": "matmul", "inputs": ["w", "x"]},
            {"id": "x", "kind": "input", "params": {"shape": [2, 1]}},
            {"id": "w", "kind": "parameter", "params": {"shape": [2, 2]}}
          ]
        }"#;
        let err = graph_from_json(doc).unwrap_err();
        assert!(matches!(err, GraphIoError::Graph(GraphError::ForwardReference { .. })));
    }

    #[test]
    fn rejects_missing_shape() {
        let doc = r#"{"nodes": [{"id": "x", "kind": "input"}]}"#;
        let err = graph_from_json(doc).unwrap_err();
        assert!(matches!(err, GraphIoError::Graph(GraphError::MissingField { field: "shape", .. })));
    }
}
