//! The scale transform: replacing `s(x)` with `s(delta * x)` at chosen
//! function nodes.

use super::{Graph, GraphError, NodeId, NodeKind};
use std::collections::BTreeMap;

/// Returns a new graph identical to `g` except that each function node in
/// `plan` carries the given scale factor. The original graph is untouched.
pub fn apply_scale(g: &Graph, plan: &BTreeMap<NodeId, f64>) -> Result<Graph, GraphError> {
    for (&id, &delta) in plan {
        match g.kind(id) {
            NodeKind::Func { .. } => {
                if !(delta > 0.0 && delta <= 1.0) {
                    return Err(GraphError::InvalidDelta { node: g.name(id).to_string(), delta });
                }
            }
            _ => return Err(GraphError::NotAFunctionNode { node: g.name(id).to_string() }),
        }
    }
    let mut out = g.clone();
    for (&id, &delta) in plan {
        if let NodeKind::Func { func, .. } = out.nodes[id.index()].kind {
            out.nodes[id.index()].kind = NodeKind::Func { func, delta };
        }
    }
    Ok(out)
}

/// Plan assigning one uniform scale factor to every function node of `g`.
pub fn uniform_scale_plan(g: &Graph, delta: f64) -> BTreeMap<NodeId, f64> {
    g.func_nodes().into_iter().map(|id| (id, delta)).collect()
}
