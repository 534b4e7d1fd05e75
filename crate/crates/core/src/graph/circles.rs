//! Multi-path ("circle") detection for a chosen parameter.
//!
//! A circle exists when two or more inputs of some node both depend on the
//! same parameter — e.g. the outer product node of `W * sigmoid(W * x)`, or
//! the shared weight of an unrolled recurrence. Curvature propagation along a
//! single path is only valid when no circle exists for the variable.

use super::{Graph, GraphError, NodeId, NodeKind};

/// One meet point where several input branches of `meet` depend on
/// `variable`. `branches` holds, for each dependent input slot, a node path
/// from that input down to the variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePath {
    pub variable: NodeId,
    pub meet: NodeId,
    pub branches: Vec<Vec<NodeId>>,
}

/// Reports every node with two or more variable-dependent input slots, in
/// topological order. An empty result means the graph is tree-structured with
/// respect to `variable`.
pub fn detect_circles(g: &Graph, variable: NodeId) -> Result<Vec<CirclePath>, GraphError> {
    if !matches!(g.kind(variable), NodeKind::Parameter) {
        return Err(GraphError::VariableNotParameter { node: g.name(variable).to_string() });
    }
    let dep = g.depends_on(variable);
    let mut circles = Vec::new();
    for id in g.ids() {
        let dependent: Vec<NodeId> =
            g.inputs(id).iter().copied().filter(|i| dep[i.index()]).collect();
        if dependent.len() >= 2 {
            let branches =
                dependent.iter().map(|&input| trace_branch(g, &dep, input, variable)).collect();
            circles.push(CirclePath { variable, meet: id, branches });
        }
    }
    Ok(circles)
}

/// One concrete node chain from `from` down to `variable`, following the
/// first dependent input at each step.
fn trace_branch(g: &Graph, dep: &[bool], from: NodeId, variable: NodeId) -> Vec<NodeId> {
    let mut path = vec![from];
    let mut cur = from;
    while cur != variable {
        let next = g
            .inputs(cur)
            .iter()
            .copied()
            .find(|i| dep[i.index()])
            .expect("dependent node has a dependent input");
        path.push(next);
        cur = next;
    }
    path
}
